//! A Monte-Carlo kernel between STL formulae.
//!
//! Each formula maps to the vector of its robustness values at time 0 over a
//! fixed basis of sampled trajectories; the kernel is the mean elementwise
//! product of two such vectors, i.e. a Monte-Carlo estimate of the L2 inner
//! product of the robustness functionals under the trajectory measure.
//! Robustness is clamped to a symmetric range first so that `true` (infinite
//! robustness) and other unbounded formulae stay integrable.

mod kpca;

pub use kpca::{kpca_fit, KpcaModel};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stl::{robustness_at_zero, Formula};
use crate::trajectory::{sample_mu0_batch, Mu0Params, Trajectory};

/// Default clamp R: robustness is truncated to [-R, R] before integration.
/// Covers the default trajectory measure range with a wide margin.
pub const DEFAULT_CLAMP: f64 = 200.0;

/// Default Monte-Carlo basis size.
pub const DEFAULT_BASIS_SIZE: usize = 5000;

/// The trajectory sample realizing the Monte-Carlo integral.
#[derive(Debug, Clone)]
pub struct SignatureBasis {
    trajectories: Vec<Trajectory>,
    seed: u64,
}

impl SignatureBasis {
    /// Samples `size` trajectories from the base measure.
    pub fn sample(params: &Mu0Params, size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParams("basis size must be >= 1".into()));
        }
        Ok(SignatureBasis {
            trajectories: sample_mu0_batch(params, seed, size)?,
            seed,
        })
    }

    /// Wraps existing trajectories; they must share length and dimension.
    pub fn from_trajectories(trajectories: Vec<Trajectory>, seed: u64) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::EmptyInput("empty basis".into()));
        }
        let (len, dims) = (trajectories[0].len(), trajectories[0].dims());
        if trajectories
            .iter()
            .any(|t| t.len() != len || t.dims() != dims)
        {
            return Err(Error::InvalidTrajectory(
                "basis trajectories must share length and dimension".into(),
            ));
        }
        Ok(SignatureBasis { trajectories, seed })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.trajectories[0].dims()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Clamped robustness of one formula over the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessVector {
    values: Vec<f64>,
}

impl RobustnessVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Monte-Carlo inner product: mean elementwise product.
    pub fn dot_mean(&self, other: &RobustnessVector) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        sum / self.values.len() as f64
    }
}

/// Kernel evaluator over a fixed basis and clamp range.
#[derive(Debug, Clone)]
pub struct StlKernel {
    basis: SignatureBasis,
    clamp: f64,
}

impl StlKernel {
    pub fn new(basis: SignatureBasis, clamp: f64) -> Result<Self> {
        if !(clamp > 0.0) || !clamp.is_finite() {
            return Err(Error::InvalidParams(format!(
                "clamp must be positive and finite, got {clamp}"
            )));
        }
        Ok(StlKernel { basis, clamp })
    }

    pub fn with_defaults(basis: SignatureBasis) -> Self {
        StlKernel {
            basis,
            clamp: DEFAULT_CLAMP,
        }
    }

    pub fn basis(&self) -> &SignatureBasis {
        &self.basis
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    /// Robustness of `phi` at time 0 on every basis trajectory, clamped.
    pub fn robustness_vector(&self, phi: &Formula) -> Result<RobustnessVector> {
        let values = self
            .basis
            .trajectories
            .iter()
            .map(|xi| Ok(robustness_at_zero(phi, xi)?.clamp(-self.clamp, self.clamp)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(RobustnessVector { values })
    }

    /// Robustness vectors for many formulae, computed in parallel.
    pub fn robustness_vectors(&self, formulas: &[Formula]) -> Result<Vec<RobustnessVector>> {
        formulas
            .par_iter()
            .map(|phi| self.robustness_vector(phi))
            .collect()
    }

    /// Raw (unnormalized) kernel value.
    pub fn kernel_raw(&self, phi: &Formula, psi: &Formula) -> Result<f64> {
        Ok(self
            .robustness_vector(phi)?
            .dot_mean(&self.robustness_vector(psi)?))
    }

    /// Normalized (cosine) kernel value in [-1, 1].
    pub fn kernel(&self, phi: &Formula, psi: &Formula) -> Result<f64> {
        let r_phi = self.robustness_vector(phi)?;
        let r_psi = self.robustness_vector(psi)?;
        let k_phi = r_phi.dot_mean(&r_phi);
        let k_psi = r_psi.dot_mean(&r_psi);
        normalized_entry(r_phi.dot_mean(&r_psi), k_phi, k_psi)
    }

    /// Gram matrix over a formula list, from cached robustness vectors.
    pub fn gram(&self, formulas: &[Formula], normalized: bool) -> Result<GramMatrix> {
        let vectors = self.robustness_vectors(formulas)?;
        gram_from_vectors(&vectors, normalized)
    }
}

/// `num / sqrt(k_self_a * k_self_b)`; exact +-1 for identical and negated
/// robustness vectors under IEEE round-to-nearest.
fn normalized_entry(num: f64, k_self_a: f64, k_self_b: f64) -> Result<f64> {
    if k_self_a <= 0.0 || k_self_b <= 0.0 {
        return Err(Error::DegenerateKernel(
            "zero self-kernel (constant-zero robustness) cannot be normalized".into(),
        ));
    }
    Ok((num / (k_self_a * k_self_b).sqrt()).clamp(-1.0, 1.0))
}

/// Builds a Gram matrix from precomputed robustness vectors.
pub fn gram_from_vectors(vectors: &[RobustnessVector], normalized: bool) -> Result<GramMatrix> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::EmptyInput("no formulas for Gram matrix".into()));
    }
    // Upper triangle in parallel, then mirrored, so symmetry is exact.
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| vectors[i].dot_mean(&vectors[j]))
                .collect()
        })
        .collect();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (off, &v) in rows[i].iter().enumerate() {
            let j = i + off;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    if normalized {
        let diag: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                k[(i, j)] = normalized_entry(k[(i, j)], diag[i], diag[j])?;
            }
        }
        for i in 0..n {
            k[(i, i)] = 1.0;
        }
    }
    Ok(GramMatrix { k, normalized })
}

/// Symmetric kernel matrix over a formula list.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    k: DMatrix<f64>,
    normalized: bool,
}

impl GramMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.k.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.k.nrows() == 0
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.k[(i, j)]
    }

    /// Eigenvalues of the (symmetrized) matrix, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.k + self.k.transpose()) * 0.5;
        let mut eig: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        eig
    }
}

/// Cosine similarity of two embedding vectors; errors on a zero vector.
pub fn kernel_similarity(e1: &[f64], e2: &[f64]) -> Result<f64> {
    if e1.len() != e2.len() {
        return Err(Error::ShapeMismatch(format!(
            "embedding dims {} vs {}",
            e1.len(),
            e2.len()
        )));
    }
    let dot: f64 = e1.iter().zip(e2).map(|(a, b)| a * b).sum();
    let n1: f64 = e1.iter().map(|a| a * a).sum();
    let n2: f64 = e2.iter().map(|a| a * a).sum();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (n1 * n2).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse;

    fn small_kernel(size: usize, seed: u64) -> StlKernel {
        let params = Mu0Params {
            b: 20.0,
            ..Mu0Params::default()
        };
        let basis = SignatureBasis::sample(&params, size, seed).unwrap();
        StlKernel::with_defaults(basis)
    }

    #[test]
    fn true_clamps_to_r() {
        let kernel = small_kernel(10, 1);
        let r = kernel.robustness_vector(&Formula::True).unwrap();
        assert!(r.values().iter().all(|&v| v == DEFAULT_CLAMP));
    }

    #[test]
    fn atomic_vector_reads_start_values() {
        let kernel = small_kernel(10, 2);
        let phi = parse("x_0 >= 0").unwrap();
        let r = kernel.robustness_vector(&phi).unwrap();
        for (v, xi) in r.values().iter().zip(kernel.basis().trajectories()) {
            assert_eq!(*v, xi.value(0, 0));
        }
    }

    #[test]
    fn negation_negates_the_vector() {
        let kernel = small_kernel(16, 3);
        let phi = parse("F[0,5] x_0 >= 0.2").unwrap();
        let r = kernel.robustness_vector(&phi).unwrap();
        let rn = kernel.robustness_vector(&phi.negate()).unwrap();
        for (a, b) in r.values().iter().zip(rn.values()) {
            assert_eq!(*b, -*a);
        }
    }

    #[test]
    fn normalized_self_and_negation_are_exact() {
        let kernel = small_kernel(64, 4);
        let phi = parse("G[0,10] x_0 <= 1.5").unwrap();
        assert_eq!(kernel.kernel(&phi, &phi).unwrap(), 1.0);
        assert_eq!(kernel.kernel(&phi, &phi.negate()).unwrap(), -1.0);
    }

    #[test]
    fn kernel_is_symmetric_and_negation_bilinear() {
        let kernel = small_kernel(32, 5);
        let phi = parse("F[0,8] x_0 >= 0.5").unwrap();
        let psi = parse("x_0 <= 0 U[2,9] x_0 >= -1").unwrap();
        let k_pq = kernel.kernel_raw(&phi, &psi).unwrap();
        let k_qp = kernel.kernel_raw(&psi, &phi).unwrap();
        assert_eq!(k_pq, k_qp);
        let k_negp_q = kernel.kernel_raw(&phi.negate(), &psi).unwrap();
        assert_eq!(k_negp_q, -k_pq);
    }

    #[test]
    fn gram_of_negation_pair() {
        let kernel = small_kernel(32, 6);
        let phi = parse("G[0,6] x_0 <= 0.8").unwrap();
        let gram = kernel.gram(&[phi.clone(), phi.negate()], true).unwrap();
        assert_eq!(gram.entry(0, 0), 1.0);
        assert_eq!(gram.entry(1, 1), 1.0);
        assert_eq!(gram.entry(0, 1), -1.0);
        assert_eq!(gram.entry(1, 0), -1.0);
    }

    #[test]
    fn one_formula_gram_is_unit() {
        let kernel = small_kernel(8, 7);
        let gram = kernel
            .gram(&[parse("x_0 >= 0").unwrap()], true)
            .unwrap();
        assert_eq!(gram.len(), 1);
        assert_eq!(gram.entry(0, 0), 1.0);
    }

    #[test]
    fn zero_self_kernel_errors_on_normalization() {
        // x_0 >= 0 and x_0 <= 0 has robustness min(x, -x) <= 0, but a formula
        // with identically zero robustness needs a constant-zero signal.
        let tr = Trajectory::new(vec![vec![0.0], vec![0.0], vec![0.0]], 1.0, 0.0).unwrap();
        let basis = SignatureBasis::from_trajectories(vec![tr], 0).unwrap();
        let kernel = StlKernel::with_defaults(basis);
        let phi = parse("x_0 >= 0").unwrap();
        assert!(matches!(
            kernel.kernel(&phi, &phi),
            Err(Error::DegenerateKernel(_))
        ));
    }

    #[test]
    fn cosine_similarity_basics() {
        let v = vec![1.0, 2.0, -1.0];
        let neg: Vec<f64> = v.iter().map(|a| -a).collect();
        assert_eq!(kernel_similarity(&v, &v).unwrap(), 1.0);
        assert_eq!(kernel_similarity(&v, &neg).unwrap(), -1.0);
        assert_eq!(
            kernel_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(),
            0.0
        );
        assert!(matches!(
            kernel_similarity(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::ZeroVector)
        ));
    }
}
