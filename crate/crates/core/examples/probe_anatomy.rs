use stlex::classifier::*;
use stlex::concepts::{build_concept_bank, BankConfig};
use stlex::datasets::{gen_cruise, CruiseConfig};
use stlex::rng::substream;

fn main() {
    let set = gen_cruise(&CruiseConfig::default(), substream(42, "data")).unwrap();
    let mut bank_config = BankConfig::for_dataset(&set, substream(42, "bank"));
    bank_config.basis_size = 500;
    bank_config.bank_size = 256;
    let bank = build_concept_bank(&bank_config).unwrap();
    let (train_set, _) = set.stratified_split(0.7, 1).unwrap();

    for lr in [1e-3, 1e-2] {
        println!("--- lr {lr}");
        // train in 10-epoch slices, inspecting between slices
        let config = TrainConfig { epochs: 10, learning_rate: lr, batch_size: 32, d_att: 32, hidden: 64, ..TrainConfig::default() };
        // emulate slicing by retraining with more epochs (deterministic anyway)
        for total in [10usize, 30, 50] {
            let mut c = config.clone();
            c.epochs = total;
            let (params, history) = train(&train_set, &bank, &c, 12345).unwrap();
            let preds = predict(&params, &train_set, &bank).unwrap();
            // attention stats
            let mut maxdev: f64 = 0.0;
            for att in &preds.attentions {
                for &w in att.weights() {
                    maxdev = maxdev.max((w - 1.0 / bank.len() as f64).abs());
                }
            }
            // prob spread
            let pmin = preds.probabilities.iter().cloned().fold(1.0, f64::min);
            let pmax = preds.probabilities.iter().cloned().fold(0.0, f64::max);
            let wq = params.param_set().tensor("w_q").unwrap().norm();
            let w2 = params.param_set().tensor("w2").unwrap().norm();
            println!(
                "  epochs {total}: loss {:.4} acc {:.3} | p range [{:.3},{:.3}] | max|a-u| {:.4} | |w_q| {:.3} |w2| {:.3}",
                history.epochs.last().unwrap().loss,
                history.epochs.last().unwrap().accuracy,
                pmin, pmax, maxdev, wq, w2
            );
        }
    }
}
