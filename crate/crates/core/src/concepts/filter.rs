//! Signature-based deduplication.
//!
//! A candidate's signature is its clamped robustness row over a probe set.
//! The greedy filter walks candidates in order and keeps one only if its
//! signature stays below the cosine-similarity ceiling `tau` against every
//! signature already kept, so near-duplicate parameterizations collapse
//! while genuinely different behaviours survive.

use rayon::prelude::*;

use crate::error::Result;
use crate::stl::{robustness_at_zero, Formula};
use crate::trajectory::Trajectory;

/// Robustness rows `S[i][j] = rho(phi_i, xi_j, 0)`, clamped to `[-clamp, clamp]`.
pub fn signature_matrix(
    formulas: &[Formula],
    probes: &[Trajectory],
    clamp: f64,
) -> Result<Vec<Vec<f64>>> {
    formulas
        .par_iter()
        .map(|phi| {
            probes
                .iter()
                .map(|xi| Ok(robustness_at_zero(phi, xi)?.clamp(-clamp, clamp)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Cosine similarity `<a,b> / (|a||b|)`; both rows must be nonzero.
fn cosine_similarity(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (na * nb)
}

/// Greedy signature filter; returns the kept candidate indices in order.
///
/// A candidate is kept iff its signature's cosine similarity to every kept
/// signature is strictly below `tau`; a tie at exactly `tau` drops it.
/// Candidates that cannot be scored are dropped with a warning instead of
/// aborting the pass: zero-norm signatures (constant-zero robustness) have
/// no cosine, and instantiations whose nested windows run past the probe
/// length cannot be evaluated on same-length data at all.
pub fn signature_filter_indices(
    formulas: &[Formula],
    probes: &[Trajectory],
    tau: f64,
    clamp: f64,
) -> Result<Vec<usize>> {
    let signatures: Vec<Option<Vec<f64>>> = formulas
        .par_iter()
        .map(|phi| {
            probes
                .iter()
                .map(|xi| Ok(robustness_at_zero(phi, xi)?.clamp(-clamp, clamp)))
                .collect::<Result<Vec<f64>>>()
                .ok()
        })
        .collect();
    let norms: Vec<f64> = signatures
        .iter()
        .map(|row| match row {
            Some(row) => row.iter().map(|v| v * v).sum::<f64>().sqrt(),
            None => 0.0,
        })
        .collect();

    let mut kept: Vec<usize> = Vec::new();
    for (i, row) in signatures.iter().enumerate() {
        let Some(row) = row else {
            log::warn!(
                "dropping candidate {} ({}): not evaluable over the probe set",
                i,
                formulas[i]
            );
            continue;
        };
        if norms[i] == 0.0 {
            log::warn!(
                "dropping candidate {} ({}): zero signature over the probe set",
                i,
                formulas[i]
            );
            continue;
        }
        let diverse = kept.iter().all(|&j| {
            let other = signatures[j].as_ref().expect("kept rows are evaluable");
            cosine_similarity(row, norms[i], other, norms[j]) < tau
        });
        if diverse {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Greedy signature filter returning the kept formulae.
pub fn signature_filter(
    formulas: &[Formula],
    probes: &[Trajectory],
    tau: f64,
    clamp: f64,
) -> Result<Vec<Formula>> {
    Ok(signature_filter_indices(formulas, probes, tau, clamp)?
        .into_iter()
        .map(|i| formulas[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::DEFAULT_CLAMP;
    use crate::stl::parse;
    use crate::trajectory::{sample_mu0_batch, Mu0Params};

    fn probes() -> Vec<Trajectory> {
        let params = Mu0Params {
            b: 20.0,
            ..Mu0Params::default()
        };
        sample_mu0_batch(&params, 3, 64).unwrap()
    }

    #[test]
    fn duplicate_is_dropped() {
        let phi = parse("F[0,10] x_0 >= 0.5").unwrap();
        let kept =
            signature_filter_indices(&[phi.clone(), phi], &probes(), 0.9, DEFAULT_CLAMP).unwrap();
        assert_eq!(kept, vec![0]);
    }

    #[test]
    fn negation_pair_is_kept() {
        // Negated signatures have cosine distance 2 > tau.
        let phi = parse("F[0,10] x_0 >= 0.5").unwrap();
        let kept =
            signature_filter_indices(&[phi.clone(), phi.negate()], &probes(), 0.9, DEFAULT_CLAMP)
                .unwrap();
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn first_candidate_always_kept() {
        let candidates: Vec<Formula> = ["x_0 >= 0", "x_0 >= 0.01", "x_0 >= 0.02"]
            .iter()
            .map(|s| parse(s).unwrap())
            .collect();
        let kept = signature_filter_indices(&candidates, &probes(), 0.9, DEFAULT_CLAMP).unwrap();
        assert_eq!(kept[0], 0);
        assert_eq!(kept.len(), 1, "near-identical thresholds must collapse");
    }

    #[test]
    fn kept_set_is_pairwise_diverse() {
        let mut candidates = Vec::new();
        for text in [
            "x_0 >= 0",
            "x_0 <= 0",
            "F[0,10] x_0 >= 1",
            "G[0,10] x_0 <= -1",
            "not F[5,15] x_0 <= 0.5",
            "x_0 <= 1 U[0,8] x_0 >= -0.5",
            "G[10,20] x_0 >= 0.2",
        ] {
            candidates.push(parse(text).unwrap());
        }
        let probes = probes();
        let tau = 0.9;
        let kept = signature_filter_indices(&candidates, &probes, tau, DEFAULT_CLAMP).unwrap();
        let sigs = signature_matrix(&candidates, &probes, DEFAULT_CLAMP).unwrap();
        assert!(kept.len() >= 2);
        for (a, &i) in kept.iter().enumerate() {
            for &j in kept.iter().skip(a + 1) {
                let ni = sigs[i].iter().map(|v| v * v).sum::<f64>().sqrt();
                let nj = sigs[j].iter().map(|v| v * v).sum::<f64>().sqrt();
                let s = cosine_similarity(&sigs[i], ni, &sigs[j], nj);
                assert!(s < tau, "kept pair ({i},{j}) has similarity {s} >= {tau}");
            }
        }
    }
}
