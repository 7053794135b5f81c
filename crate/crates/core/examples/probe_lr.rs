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

    for (lr, batch) in [(3e-3, 32usize), (1e-2, 32), (3e-2, 32), (1e-2, 16), (3e-2, 16), (1e-2, 8)] {
        let config = TrainConfig { epochs: 50, learning_rate: lr, batch_size: batch, d_att: 32, hidden: 64, ..TrainConfig::default() };
        let mut accs = Vec::new();
        for seed in 0..5u64 {
            let (train_set, test_set) = set.stratified_split(0.7, substream(substream(42, "train"), "split")).unwrap();
            let (params, _) = train(&train_set, &bank, &config, substream(substream(42, "train"), &format!("seed-{seed}"))).unwrap();
            let predictions = predict(&params, &test_set, &bank).unwrap();
            accs.push(accuracy(&predictions.labels, test_set.labels()));
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        println!("lr={lr:<7} batch={batch}: accs {:?} mean {:.3}", accs.iter().map(|a| (a*100.0).round()/100.0).collect::<Vec<_>>(), mean);
    }
}
