use stlex::classifier::{accuracy, predict, train, OptimizerKind, TrainConfig};
use stlex::concepts::{build_concept_bank, BankConfig};
use stlex::datasets::{gen_cruise, CruiseConfig};
use stlex::rng::substream;

fn main() {
    let t0 = std::time::Instant::now();
    let set = gen_cruise(&CruiseConfig::default(), substream(42, "data")).unwrap();
    let mut bank_config = BankConfig::for_dataset(&set, substream(42, "bank"));
    bank_config.basis_size = 500;
    bank_config.bank_size = 256;
    let bank = build_concept_bank(&bank_config).unwrap();
    println!("bank built: {} concepts, pool {}, {:.1?}", bank.len(), bank.meta().pool_size, t0.elapsed());

    let config = TrainConfig {
        epochs: 50,
        learning_rate: 1e-3,
        batch_size: 32,
        optimizer: OptimizerKind::default(),
        seeds: vec![0, 1, 2, 3, 4],
        train_frac: 0.7,
        d_att: 32,
        hidden: 64,
    };
    let mut accs = Vec::new();
    for &seed in &config.seeds {
        let t1 = std::time::Instant::now();
        let split_seed = substream(substream(42, "train"), "split");
        let (train_set, test_set) = set.stratified_split(config.train_frac, split_seed).unwrap();
        let (params, history) = train(&train_set, &bank, &config, substream(substream(42, "train"), &format!("seed-{seed}"))).unwrap();
        let predictions = predict(&params, &test_set, &bank).unwrap();
        let acc = accuracy(&predictions.labels, test_set.labels());
        println!(
            "seed {seed}: train acc {:.3}, test acc {:.3}, {:.1?}",
            history.final_accuracy().unwrap(),
            acc,
            t1.elapsed()
        );
        accs.push(acc);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    println!("mean test accuracy {:.4}, total {:.1?}", mean, t0.elapsed());
}
