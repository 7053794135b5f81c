//! Base-measure sampler over piecewise linear trajectories.
//!
//! A sampled signal starts at a normal draw, has a squared-normal total
//! variation K split at uniform breakpoints, and walks up or down one
//! breakpoint gap per step, flipping direction with probability `q`. Low
//! total variation and few monotonicity changes are likely, so "simple"
//! signals carry most of the measure.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{Error, Result};
use crate::rng;

/// Parameters of the trajectory measure.
///
/// Defaults: interval [0, 100] at unit step, standard-normal start and
/// total-variation root, flip probability 0.1, one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mu0Params {
    /// Interval start (also the time of the first sample).
    pub a: f64,
    /// Interval end.
    pub b: f64,
    /// Sampling step.
    pub delta: f64,
    /// Mean of the start-point normal.
    pub m_start: f64,
    /// Std of the start-point normal.
    pub sigma_start: f64,
    /// Mean of the total-variation root normal.
    pub m_tv: f64,
    /// Std of the total-variation root normal.
    pub sigma_tv: f64,
    /// Probability of flipping the slope sign at each step.
    pub q: f64,
    /// Signal dimensionality; dimensions are sampled independently.
    pub n_dims: usize,
}

impl Default for Mu0Params {
    fn default() -> Self {
        Mu0Params {
            a: 0.0,
            b: 100.0,
            delta: 1.0,
            m_start: 0.0,
            sigma_start: 1.0,
            m_tv: 0.0,
            sigma_tv: 1.0,
            q: 0.1,
            n_dims: 1,
        }
    }
}

impl Mu0Params {
    /// Defaults rescaled to a dataset: time grid matching `len` steps, start
    /// statistics from the first samples, total-variation scale from the
    /// mean per-trajectory variation.
    pub fn for_data_scale(
        len: usize,
        n_dims: usize,
        start_mean: f64,
        start_sd: f64,
        mean_tv: f64,
    ) -> Self {
        Mu0Params {
            a: 0.0,
            b: (len.max(2) - 1) as f64,
            delta: 1.0,
            m_start: start_mean,
            sigma_start: start_sd.max(1e-6),
            m_tv: 0.0,
            sigma_tv: mean_tv.max(1e-6).sqrt(),
            q: 0.1,
            n_dims,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > self.a) {
            return Err(Error::InvalidParams(format!(
                "need b > a, got [{}, {}]",
                self.a, self.b
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if self.b - self.a < self.delta {
            return Err(Error::InvalidParams(
                "interval shorter than one sampling step".into(),
            ));
        }
        if !(self.sigma_start > 0.0) || !(self.sigma_tv > 0.0) {
            return Err(Error::InvalidParams("sigmas must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidParams(format!(
                "q must be in [0,1], got {}",
                self.q
            )));
        }
        if self.n_dims == 0 {
            return Err(Error::InvalidParams("n_dims must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of steps N = floor((b - a) / delta); the trajectory has N + 1
    /// samples.
    pub fn n_steps(&self) -> usize {
        ((self.b - self.a) / self.delta).floor() as usize
    }
}

/// Draws one trajectory. Deterministic in (params, seed).
pub fn sample_mu0(params: &Mu0Params, seed: u64) -> Result<Trajectory> {
    Ok(sample_mu0_with_tv(params, seed)?.0)
}

/// Like [`sample_mu0`], additionally returning the drawn total-variation
/// target K of each dimension. The sum of absolute increments of dimension
/// `d` telescopes to `K[d]`.
pub fn sample_mu0_with_tv(params: &Mu0Params, seed: u64) -> Result<(Trajectory, Vec<f64>)> {
    params.validate()?;
    let n_steps = params.n_steps();
    let n_points = n_steps + 1;
    let mut data = vec![0.0_f64; n_points * params.n_dims];
    let mut tv_targets = Vec::with_capacity(params.n_dims);
    let mut rng = rng::rng_from_seed(seed);

    let start_dist = Normal::new(params.m_start, params.sigma_start)
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    let tv_dist = Normal::new(params.m_tv, params.sigma_tv)
        .map_err(|e| Error::InvalidParams(e.to_string()))?;

    for dim in 0..params.n_dims {
        let start = start_dist.sample(&mut rng);
        let tv_root: f64 = tv_dist.sample(&mut rng);
        let total_variation = tv_root * tv_root;
        tv_targets.push(total_variation);

        // Breakpoints 0 = y_0 <= y_1 <= ... <= y_N = K.
        let mut breakpoints = Vec::with_capacity(n_points);
        breakpoints.push(0.0);
        for _ in 0..n_steps.saturating_sub(1) {
            breakpoints.push(rng.gen::<f64>() * total_variation);
        }
        breakpoints.push(total_variation);
        breakpoints.sort_by(f64::total_cmp);

        let mut sign: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        data[dim] = start;
        for i in 0..n_steps {
            if rng.gen_bool(params.q) {
                sign = -sign;
            }
            let increment = breakpoints[i + 1] - breakpoints[i];
            data[(i + 1) * params.n_dims + dim] = data[i * params.n_dims + dim] + sign * increment;
        }
    }

    let trajectory = Trajectory::from_flat(data, params.n_dims, params.delta, params.a)?;
    Ok((trajectory, tv_targets))
}

/// Draws a batch in parallel; trajectory `i` uses the seed derived from
/// (seed, i), so the batch is reproducible and order-independent.
pub fn sample_mu0_batch(params: &Mu0Params, seed: u64, count: usize) -> Result<Vec<Trajectory>> {
    params.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| sample_mu0(params, rng::indexed(seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_is_101_points() {
        let tr = sample_mu0(&Mu0Params::default(), 7).unwrap();
        assert_eq!(tr.len(), 101);
        assert_eq!(tr.dims(), 1);
        assert_eq!(tr.dt(), 1.0);
        assert_eq!(tr.t0(), 0.0);
    }

    #[test]
    fn reproducible_per_seed() {
        let params = Mu0Params::default();
        let a = sample_mu0(&params, 123).unwrap();
        let b = sample_mu0(&params, 123).unwrap();
        assert_eq!(a, b);
        let c = sample_mu0(&params, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn q_zero_gives_monotone_dimensions() {
        let params = Mu0Params {
            q: 0.0,
            n_dims: 3,
            ..Mu0Params::default()
        };
        let tr = sample_mu0(&params, 99).unwrap();
        for dim in 0..3 {
            let vals: Vec<f64> = tr.dimension(dim).collect();
            let increasing = vals.windows(2).all(|w| w[1] >= w[0]);
            let decreasing = vals.windows(2).all(|w| w[1] <= w[0]);
            assert!(increasing || decreasing, "dim {dim} not monotone");
        }
    }

    #[test]
    fn total_variation_telescopes_to_target() {
        let params = Mu0Params {
            n_dims: 2,
            ..Mu0Params::default()
        };
        for seed in 0..50 {
            let (tr, targets) = sample_mu0_with_tv(&params, seed).unwrap();
            for dim in 0..2 {
                let tv = tr.total_variation(dim);
                let k = targets[dim];
                assert!(
                    (tv - k).abs() <= 1e-9 * k.max(1.0),
                    "seed {seed} dim {dim}: tv {tv} vs target {k}"
                );
            }
        }
    }

    #[test]
    fn batch_is_deterministic_and_distinct() {
        let params = Mu0Params::default();
        let batch1 = sample_mu0_batch(&params, 5, 8).unwrap();
        let batch2 = sample_mu0_batch(&params, 5, 8).unwrap();
        assert_eq!(batch1, batch2);
        assert_ne!(batch1[0], batch1[1]);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = Mu0Params::default();
        p.q = 1.5;
        assert!(sample_mu0(&p, 0).is_err());
        let mut p = Mu0Params::default();
        p.b = p.a;
        assert!(sample_mu0(&p, 0).is_err());
        let mut p = Mu0Params::default();
        p.delta = -1.0;
        assert!(sample_mu0(&p, 0).is_err());
    }
}
