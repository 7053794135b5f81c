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
    let shapes = ModelShapes { feat_dim: 2, embed_dim: 16, d_att: 32, hidden: 64 };

    for seed in [1u64, 2, 3] {
        let params = ModelParams::init(shapes, seed);
        let preds = predict(&params, &set, &bank).unwrap();
        // class-mean attention vectors
        let c = bank.len();
        let mut mean0 = vec![0.0; c];
        let mut mean1 = vec![0.0; c];
        let (mut n0, mut n1) = (0.0, 0.0);
        for (att, &label) in preds.attentions.iter().zip(set.labels()) {
            let target = if label == 0 { (&mut mean0, &mut n0) } else { (&mut mean1, &mut n1) };
            for (m, w) in target.0.iter_mut().zip(att.weights()) { *m += w; }
            *target.1 += 1.0;
        }
        for m in mean0.iter_mut() { *m /= n0; }
        for m in mean1.iter_mut() { *m /= n1; }
        let gap: f64 = mean0.iter().zip(&mean1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        // within-class spread along the gap direction
        let dir: Vec<f64> = mean0.iter().zip(&mean1).map(|(a, b)| (a - b) / gap.max(1e-300)).collect();
        let mut proj0 = Vec::new();
        let mut proj1 = Vec::new();
        for (att, &label) in preds.attentions.iter().zip(set.labels()) {
            let p: f64 = att.weights().iter().zip(&dir).map(|(w, d)| w * d).sum();
            if label == 0 { proj0.push(p) } else { proj1.push(p) }
        }
        let sd = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        // 1-D Fisher-style separation of projections
        let sep = {
            let m0 = proj0.iter().sum::<f64>() / proj0.len() as f64;
            let m1 = proj1.iter().sum::<f64>() / proj1.len() as f64;
            (m0 - m1).abs() / (sd(&proj0) + sd(&proj1) + 1e-300)
        };
        println!("seed {seed}: att gap {gap:.5}, fisher separation {sep:.3}");
        // simple threshold classifier on the projection
        let mut all: Vec<(f64, u8)> = proj0.iter().map(|&p| (p, 0u8)).chain(proj1.iter().map(|&p| (p, 1u8))).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = 0usize;
        for cut in 0..all.len() {
            let acc_a = all.iter().enumerate().filter(|(i, (_, l))| (*i < cut) == (*l == 0)).count();
            best = best.max(acc_a.max(all.len() - acc_a));
        }
        println!("   best 1-D threshold accuracy on pooled attention: {:.3}", best as f64 / all.len() as f64);
    }
}
