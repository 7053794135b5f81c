//! Kernel PCA over a normalized Gram matrix.
//!
//! Fitting double-centers the Gram matrix, eigendecomposes it, and keeps the
//! leading eigenpairs above a numerical floor. Training formulae embed as
//! sqrt(lambda)-scaled eigenvector rows; new formulae embed by centering
//! their kernel column against the training set and projecting.

use nalgebra::DMatrix;

use super::{normalized_entry, GramMatrix, RobustnessVector, StlKernel};
use crate::error::{Error, Result};
use crate::stl::Formula;

/// Eigenvalues at or below this are treated as numerically zero rank.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KpcaModel {
    /// C x d eigenvectors (columns, unit norm).
    eigenvectors: DMatrix<f64>,
    /// Retained eigenvalues, non-increasing.
    eigenvalues: Vec<f64>,
    /// Clamped robustness vectors of the training formulae.
    train_vectors: Vec<RobustnessVector>,
    /// Raw self-kernels of the training formulae.
    train_self: Vec<f64>,
    /// Row means of the training Gram matrix.
    row_means: Vec<f64>,
    /// Grand mean of the training Gram matrix.
    total_mean: f64,
    /// C x d training embeddings.
    embeddings: DMatrix<f64>,
}

/// Fits a kernel PCA model of dimension `embed_dim`.
///
/// `train_vectors` must be the robustness vectors the Gram matrix was built
/// from; they are retained for out-of-sample embedding.
pub fn kpca_fit(
    gram: &GramMatrix,
    train_vectors: Vec<RobustnessVector>,
    embed_dim: usize,
) -> Result<KpcaModel> {
    if !gram.normalized() {
        return Err(Error::InvalidParams(
            "kernel PCA expects a normalized Gram matrix".into(),
        ));
    }
    let n = gram.len();
    if train_vectors.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} robustness vectors for a {}x{} Gram matrix",
            train_vectors.len(),
            n,
            n
        )));
    }
    if embed_dim == 0 || embed_dim > n {
        return Err(Error::InvalidParams(format!(
            "embed_dim must be in 1..={n}, got {embed_dim}"
        )));
    }

    let k = gram.matrix();
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
    let total_mean = row_means.iter().sum::<f64>() / n as f64;

    let mut centered = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            centered[(i, j)] = k[(i, j)] - row_means[i] - row_means[j] + total_mean;
        }
    }
    let centered = (&centered + centered.transpose()) * 0.5;

    let eig = centered.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let rank = order
        .iter()
        .take_while(|&&i| eig.eigenvalues[i] > EIGENVALUE_FLOOR)
        .count();
    if embed_dim > rank {
        return Err(Error::RankExceeded {
            requested: embed_dim,
            rank,
        });
    }

    let mut eigenvectors = DMatrix::<f64>::zeros(n, embed_dim);
    let mut eigenvalues = Vec::with_capacity(embed_dim);
    for (l, &idx) in order.iter().take(embed_dim).enumerate() {
        eigenvalues.push(eig.eigenvalues[idx]);
        eigenvectors.set_column(l, &eig.eigenvectors.column(idx));
    }

    let mut embeddings = DMatrix::<f64>::zeros(n, embed_dim);
    for l in 0..embed_dim {
        let scale = eigenvalues[l].sqrt();
        for i in 0..n {
            embeddings[(i, l)] = scale * eigenvectors[(i, l)];
        }
    }

    let train_self: Vec<f64> = train_vectors.iter().map(|r| r.dot_mean(r)).collect();

    Ok(KpcaModel {
        eigenvectors,
        eigenvalues,
        train_vectors,
        train_self,
        row_means,
        total_mean,
        embeddings,
    })
}

impl KpcaModel {
    pub fn embed_dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn train_size(&self) -> usize {
        self.train_vectors.len()
    }

    /// Retained eigenvalues, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Training embeddings, one row per training formula.
    pub fn embeddings(&self) -> &DMatrix<f64> {
        &self.embeddings
    }

    pub fn embedding_row(&self, i: usize) -> Vec<f64> {
        self.embeddings.row(i).iter().copied().collect()
    }

    /// Embeds a formula by centering its normalized kernel column against
    /// the training set and projecting onto the retained eigenvectors.
    pub fn embed(&self, phi: &Formula, kernel: &StlKernel) -> Result<Vec<f64>> {
        let r = kernel.robustness_vector(phi)?;
        let k_self = r.dot_mean(&r);
        let n = self.train_vectors.len();
        let mut column = Vec::with_capacity(n);
        for (train, &train_self) in self.train_vectors.iter().zip(&self.train_self) {
            column.push(normalized_entry(r.dot_mean(train), k_self, train_self)?);
        }
        let col_mean = column.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = column
            .iter()
            .zip(&self.row_means)
            .map(|(&c, &rm)| c - col_mean - rm + self.total_mean)
            .collect();

        let mut out = Vec::with_capacity(self.embed_dim());
        for l in 0..self.embed_dim() {
            let proj: f64 = (0..n)
                .map(|i| self.eigenvectors[(i, l)] * centered[i])
                .sum();
            out.push(proj / self.eigenvalues[l].sqrt());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SignatureBasis;
    use crate::stl::parse;
    use crate::trajectory::Mu0Params;

    fn formulas() -> Vec<Formula> {
        [
            "x_0 >= 0",
            "x_0 <= 0.5",
            "F[0,5] x_0 >= 1",
            "G[0,8] x_0 <= 2",
            "not F[2,9] x_0 <= -0.5",
            "x_0 >= -1 U[0,6] x_0 <= 0",
        ]
        .iter()
        .map(|s| parse(s).unwrap())
        .collect()
    }

    fn kernel() -> StlKernel {
        let params = Mu0Params {
            b: 20.0,
            ..Mu0Params::default()
        };
        StlKernel::with_defaults(SignatureBasis::sample(&params, 200, 11).unwrap())
    }

    #[test]
    fn full_rank_reconstructs_centered_gram() {
        let kernel = kernel();
        let phis = formulas();
        let vectors = kernel.robustness_vectors(&phis).unwrap();
        let gram = super::super::gram_from_vectors(&vectors, true).unwrap();
        let eigs = gram.eigenvalues();

        // Usable rank of the centered matrix (centering removes one).
        let model_full = kpca_fit(&gram, vectors.clone(), phis.len() - 1);
        let model = match model_full {
            Ok(m) => m,
            Err(Error::RankExceeded { rank, .. }) => kpca_fit(&gram, vectors, rank).unwrap(),
            Err(e) => panic!("{e}"),
        };
        drop(eigs);

        let d = model.embed_dim();
        let n = model.train_size();
        // Recompute the centered Gram and compare inner products.
        let k = gram.matrix();
        let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
        let total: f64 = row_means.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            for j in 0..n {
                let centered = k[(i, j)] - row_means[i] - row_means[j] + total;
                let dot: f64 = (0..d)
                    .map(|l| model.embeddings()[(i, l)] * model.embeddings()[(j, l)])
                    .sum();
                assert!(
                    (centered - dot).abs() < 1e-8,
                    "({i},{j}): centered {centered} vs embedded {dot}"
                );
            }
        }
    }

    #[test]
    fn training_formula_reembeds_to_its_row() {
        let kernel = kernel();
        let phis = formulas();
        let vectors = kernel.robustness_vectors(&phis).unwrap();
        let gram = super::super::gram_from_vectors(&vectors, true).unwrap();
        let model = kpca_fit(&gram, vectors, 3).unwrap();

        for (i, phi) in phis.iter().enumerate() {
            let e = model.embed(phi, &kernel).unwrap();
            let row = model.embedding_row(i);
            for (a, b) in e.iter().zip(&row) {
                assert!((a - b).abs() < 1e-8, "formula {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rank_overflow_reports_usable_rank() {
        let kernel = kernel();
        // Two perfectly anti-correlated formulas: rank 1 before centering,
        // rank drops again after centering.
        let phi = parse("x_0 >= 0").unwrap();
        let phis = vec![phi.clone(), phi.negate()];
        let vectors = kernel.robustness_vectors(&phis).unwrap();
        let gram = super::super::gram_from_vectors(&vectors, true).unwrap();
        match kpca_fit(&gram, vectors, 2) {
            Err(Error::RankExceeded { requested: 2, rank }) => assert!(rank <= 1),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn eigenvalues_are_non_increasing() {
        let kernel = kernel();
        let phis = formulas();
        let vectors = kernel.robustness_vectors(&phis).unwrap();
        let gram = super::super::gram_from_vectors(&vectors, true).unwrap();
        let model = kpca_fit(&gram, vectors, 4).unwrap();
        for w in model.eigenvalues().windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(model.eigenvalues().iter().all(|&l| l > EIGENVALUE_FLOOR));
    }
}
