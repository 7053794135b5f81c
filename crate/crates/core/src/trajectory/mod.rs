//! Sampled trajectories, the piecewise-linear base-measure sampler, and
//! labeled datasets.

mod io;
mod mu0;

pub use io::{load_csv, save_csv};
pub use mu0::{sample_mu0, sample_mu0_batch, sample_mu0_with_tv, Mu0Params};

use crate::error::{Error, Result};

/// A uniformly sampled multivariate signal.
///
/// Values are stored row-major: `value(t, i)` is dimension `i` at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    data: Vec<f64>,
    dims: usize,
    dt: f64,
    t0: f64,
}

impl Trajectory {
    /// Builds a trajectory from per-step vectors. Requires at least two steps,
    /// a positive sampling step, and finite values.
    pub fn new(values: Vec<Vec<f64>>, dt: f64, t0: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "need at least 2 samples, got {}",
                values.len()
            )));
        }
        let dims = values[0].len();
        if dims == 0 {
            return Err(Error::InvalidTrajectory("zero-dimensional signal".into()));
        }
        let mut data = Vec::with_capacity(values.len() * dims);
        for (t, row) in values.iter().enumerate() {
            if row.len() != dims {
                return Err(Error::InvalidTrajectory(format!(
                    "ragged row at step {}: {} values, expected {}",
                    t,
                    row.len(),
                    dims
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, dims, dt, t0)
    }

    pub fn from_flat(data: Vec<f64>, dims: usize, dt: f64, t0: f64) -> Result<Self> {
        if dims == 0 || data.len() % dims != 0 || data.len() / dims < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "flat buffer of {} values does not form >=2 steps of {} dims",
                data.len(),
                dims
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidTrajectory(format!("dt must be > 0, got {dt}")));
        }
        if !t0.is_finite() || data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrajectory("non-finite value".into()));
        }
        Ok(Trajectory { data, dims, dt, t0 })
    }

    /// Number of samples T.
    pub fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        false // T >= 2 by construction
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    #[inline]
    pub fn value(&self, t: usize, dim: usize) -> f64 {
        self.data[t * self.dims + dim]
    }

    /// All values of one dimension in time order.
    pub fn dimension(&self, dim: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |t| self.value(t, dim))
    }

    /// Row view of one time step.
    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.dims..(t + 1) * self.dims]
    }

    pub fn values_flat(&self) -> &[f64] {
        &self.data
    }

    /// Sum of absolute increments of one dimension.
    pub fn total_variation(&self, dim: usize) -> f64 {
        (1..self.len())
            .map(|t| (self.value(t, dim) - self.value(t - 1, dim)).abs())
            .sum()
    }
}

/// Trajectories with binary labels: 0 = regular, 1 = anomalous.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    trajectories: Vec<Trajectory>,
    labels: Vec<u8>,
}

impl LabeledSet {
    pub fn new(trajectories: Vec<Trajectory>, labels: Vec<u8>) -> Result<Self> {
        if trajectories.len() != labels.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{} trajectories but {} labels",
                trajectories.len(),
                labels.len()
            )));
        }
        if trajectories.is_empty() {
            return Err(Error::EmptyInput("no trajectories".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidTrajectory(format!(
                "label {bad} is not binary"
            )));
        }
        let (len, dims, dt) = (
            trajectories[0].len(),
            trajectories[0].dims(),
            trajectories[0].dt(),
        );
        for (i, tr) in trajectories.iter().enumerate() {
            if tr.len() != len || tr.dims() != dims || tr.dt() != dt {
                return Err(Error::InvalidTrajectory(format!(
                    "trajectory {i} has shape ({}, {}, dt {}), expected ({len}, {dims}, dt {dt})",
                    tr.len(),
                    tr.dims(),
                    tr.dt()
                )));
            }
        }
        Ok(LabeledSet {
            trajectories,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn trajectory_len(&self) -> usize {
        self.trajectories[0].len()
    }

    pub fn dims(&self) -> usize {
        self.trajectories[0].dims()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Trajectory, u8)> {
        self.trajectories.iter().zip(self.labels.iter().copied())
    }

    /// Trajectories of one class, with their indices in the set.
    pub fn class_members(&self, label: u8) -> Vec<(usize, &Trajectory)> {
        self.iter()
            .enumerate()
            .filter_map(|(i, (tr, l))| (l == label).then_some((i, tr)))
            .collect()
    }

    /// Subset by indices, preserving order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let trajectories = indices
            .iter()
            .map(|&i| self.trajectories[i].clone())
            .collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledSet::new(trajectories, labels)
    }

    /// Deterministic stratified split: within each class, indices are
    /// shuffled by the seed and the first `train_frac` share goes to train.
    pub fn stratified_split(&self, train_frac: f64, seed: u64) -> Result<(Self, Self)> {
        use rand::seq::SliceRandom;
        if !(0.0..1.0).contains(&train_frac) || train_frac == 0.0 {
            return Err(Error::InvalidParams(format!(
                "train_frac must be in (0,1), got {train_frac}"
            )));
        }
        let mut rng = crate::rng::rng_from_seed(seed);
        let mut train_idx = Vec::new();
        let mut test_idx = Vec::new();
        for class in [0u8, 1u8] {
            let mut members: Vec<usize> = self
                .labels
                .iter()
                .enumerate()
                .filter_map(|(i, &l)| (l == class).then_some(i))
                .collect();
            if members.is_empty() {
                continue;
            }
            members.shuffle(&mut rng);
            let n_train = ((members.len() as f64) * train_frac).round() as usize;
            let n_train = n_train.clamp(1, members.len().saturating_sub(1).max(1));
            train_idx.extend_from_slice(&members[..n_train]);
            test_idx.extend_from_slice(&members[n_train..]);
        }
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        if test_idx.is_empty() {
            return Err(Error::InvalidParams(
                "split leaves an empty test set".into(),
            ));
        }
        Ok((self.subset(&train_idx)?, self.subset(&test_idx)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_and_ragged_input() {
        assert!(Trajectory::new(vec![vec![1.0]], 1.0, 0.0).is_err());
        assert!(Trajectory::new(vec![vec![1.0], vec![1.0, 2.0]], 1.0, 0.0).is_err());
        assert!(Trajectory::new(vec![vec![1.0], vec![f64::NAN]], 1.0, 0.0).is_err());
        assert!(Trajectory::new(vec![vec![1.0], vec![2.0]], 0.0, 0.0).is_err());
    }

    #[test]
    fn accessors() {
        let tr = Trajectory::new(vec![vec![1.0, 10.0], vec![2.0, 20.0]], 0.5, 1.0).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.dims(), 2);
        assert_eq!(tr.value(1, 1), 20.0);
        assert_eq!(tr.step(0), &[1.0, 10.0]);
        assert_eq!(tr.dimension(1).collect::<Vec<_>>(), vec![10.0, 20.0]);
    }

    #[test]
    fn total_variation_sums_increments() {
        let tr = Trajectory::new(vec![vec![0.0], vec![2.0], vec![-1.0]], 1.0, 0.0).unwrap();
        assert_eq!(tr.total_variation(0), 5.0);
    }

    #[test]
    fn labeled_set_validates_shapes() {
        let a = Trajectory::new(vec![vec![0.0], vec![1.0]], 1.0, 0.0).unwrap();
        let b = Trajectory::new(vec![vec![0.0], vec![1.0], vec![2.0]], 1.0, 0.0).unwrap();
        assert!(LabeledSet::new(vec![a.clone()], vec![0, 1]).is_err());
        assert!(LabeledSet::new(vec![a.clone(), b], vec![0, 1]).is_err());
        assert!(LabeledSet::new(vec![a.clone(), a.clone()], vec![0, 2]).is_err());
        assert!(LabeledSet::new(vec![a.clone(), a], vec![0, 1]).is_ok());
    }

    #[test]
    fn stratified_split_is_deterministic_and_stratified() {
        let tr = Trajectory::new(vec![vec![0.0], vec![1.0]], 1.0, 0.0).unwrap();
        let set = LabeledSet::new(
            vec![tr; 20],
            (0..20).map(|i| (i % 2) as u8).collect(),
        )
        .unwrap();
        let (train1, test1) = set.stratified_split(0.7, 9).unwrap();
        let (train2, test2) = set.stratified_split(0.7, 9).unwrap();
        assert_eq!(train1, train2);
        assert_eq!(test1, test2);
        assert_eq!(train1.len(), 14);
        assert_eq!(test1.len(), 6);
        let ones = train1.labels().iter().filter(|&&l| l == 1).count();
        assert_eq!(ones, 7);
    }
}
