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

    // embedding row norms
    let norms: Vec<f64> = (0..bank.len())
        .map(|i| bank.embedding_row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mean_norm = norms.iter().sum::<f64>() / norms.len() as f64;
    println!("embedding row norm mean {:.3} max {:.3}", mean_norm, norms.iter().cloned().fold(0.0, f64::max));

    let shapes = ModelShapes { feat_dim: 2, embed_dim: 16, d_att: 32, hidden: 64 };
    let params = ModelParams::init(shapes, 1);
    // attention entropy at init
    let mut ents = Vec::new();
    let mut ps = Vec::new();
    for tr in set.trajectories().iter().take(40) {
        let (p, att) = forward(&params, tr, &bank).unwrap();
        let ent: f64 = att.weights().iter().filter(|&&w| w > 0.0).map(|&w| -w * w.ln()).sum();
        ents.push(ent);
        ps.push(p);
    }
    println!("pooled attention entropy (max {:.2}): mean {:.2}", (bank.len() as f64).ln(), ents.iter().sum::<f64>() / ents.len() as f64);
    // class-conditional probability spread at init
    let p0: Vec<f64> = ps.iter().step_by(2).cloned().collect();
    let p1: Vec<f64> = ps.iter().skip(1).step_by(2).cloned().collect();
    println!("init p class0 mean {:.4}, class1 mean {:.4}", p0.iter().sum::<f64>()/p0.len() as f64, p1.iter().sum::<f64>()/p1.len() as f64);

    // loss curve seed 4 (stuck one)
    let config = TrainConfig { epochs: 50, learning_rate: 1e-3, batch_size: 32, d_att: 32, hidden: 64, ..TrainConfig::default() };
    let (train_set, _) = set.stratified_split(0.7, 1).unwrap();
    let (_, history) = train(&train_set, &bank, &config, substream(substream(42, "train"), "seed-4")).unwrap();
    let losses: Vec<String> = history.epochs.iter().step_by(5).map(|e| format!("{}:{:.3}/{:.2}", e.epoch, e.loss, e.accuracy)).collect();
    println!("seed4 loss/acc: {}", losses.join(" "));
}
