//! Latin hypercube selection in embedding space.
//!
//! `m` stratified points are drawn in the bounding box of the concept
//! embeddings (each dimension split into `m` equal bins, one uniform draw
//! per bin, bins permuted independently per dimension). Each point then
//! claims its nearest concept; duplicates are resolved by giving the losing
//! points their nearest still-unused concept, so the selection has exactly
//! `m` distinct concepts.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Stratified points in the axis-aligned box spanned by `bounds`
/// (`(lo, hi)` per dimension). Row `k` is the k-th point.
pub fn lhs_points(bounds: &[(f64, f64)], m: usize, seed: u64) -> DMatrix<f64> {
    let dims = bounds.len();
    let mut rng = rng_from_seed(seed);
    let mut points = DMatrix::<f64>::zeros(m, dims);
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        let width = hi - lo;
        let mut vals: Vec<f64> = (0..m)
            .map(|k| (k as f64 + rng.gen::<f64>()) / m as f64)
            .collect();
        vals.shuffle(&mut rng);
        for (k, v) in vals.into_iter().enumerate() {
            points[(k, d)] = lo + v * width;
        }
    }
    points
}

/// Per-dimension bounding box of embedding rows.
pub fn embedding_bounds(embeddings: &DMatrix<f64>) -> Vec<(f64, f64)> {
    (0..embeddings.ncols())
        .map(|d| {
            let col = embeddings.column(d);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect()
}

fn squared_distance(points: &DMatrix<f64>, k: usize, embeddings: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols())
        .map(|d| {
            let diff = points[(k, d)] - embeddings[(c, d)];
            diff * diff
        })
        .sum()
}

/// Selects `m` concept indices by Latin hypercube sampling over the
/// embedding bounding box. Deterministic per seed.
pub fn lhs_select(embeddings: &DMatrix<f64>, m: usize, seed: u64) -> Result<Vec<usize>> {
    let pool = embeddings.nrows();
    if m == 0 {
        return Err(Error::InvalidParams("selection size must be >= 1".into()));
    }
    if m > pool {
        return Err(Error::SelectionTooLarge { m, pool });
    }

    let bounds = embedding_bounds(embeddings);
    let points = lhs_points(&bounds, m, seed);

    let mut used = vec![false; pool];
    let mut selected = Vec::with_capacity(m);
    let mut orphstack: Vec<usize> = Vec::new();

    // First pass: each point maps to its nearest concept; first claim wins.
    for k in 0..m {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..pool {
            let d = squared_distance(&points, k, embeddings, c);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if used[best] {
            orphstack.push(k);
        } else {
            used[best] = true;
            selected.push(best);
        }
    }

    // Top-up: points that lost their concept take the nearest unused one.
    for k in orphstack {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (c, &taken) in used.iter().enumerate() {
            if taken {
                continue;
            }
            let d = squared_distance(&points, k, embeddings, c);
            if d < best_d {
                best_d = d;
                best = Some(c);
            }
        }
        let c = best.expect("m <= pool guarantees a free concept");
        used[c] = true;
        selected.push(c);
    }

    Ok(selected)
}
