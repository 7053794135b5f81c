//! Synthetic benchmark scenarios.
//!
//! Both generators replicate the structure of their reference scenarios, not
//! any particular recorded data: a one-dimensional cruise-control set where
//! anomalies dip below the operating band, and a two-dimensional maritime
//! set where vessels either stall short of the harbour latitude or drift
//! back east. Labels alternate by index so every prefix stays balanced.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{indexed, rng_from_seed};
use crate::stl::{Comparison, Formula, Interval};
use crate::trajectory::{LabeledSet, Trajectory};
use rand::Rng;

/// Cruise-control scenario: regular trajectories oscillate inside a base
/// band, anomalous ones dip well below it for a sub-interval, and a few
/// outliers hover around the separating boundary regardless of their label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CruiseConfig {
    pub n_traj: usize,
    pub len: usize,
    /// Base operating level range (min, max).
    pub base_band: (f64, f64),
    /// Oscillation amplitude range.
    pub osc_amp: (f64, f64),
    /// Oscillation period range, in steps.
    pub osc_period: (f64, f64),
    /// How far below the band minimum anomalous dips bottom out (min, max).
    pub dip_depth: (f64, f64),
    /// Dip onset range, in steps.
    pub dip_onset: (usize, usize),
    /// Dip length range, in steps.
    pub dip_len: (usize, usize),
    /// Trajectories with borderline dips near the class boundary.
    pub outliers: usize,
    /// Half-width of the uniform observation noise.
    pub noise_sd: f64,
}

impl Default for CruiseConfig {
    fn default() -> Self {
        CruiseConfig {
            n_traj: 200,
            len: 48,
            base_band: (33.0, 39.0),
            osc_amp: (1.0, 2.5),
            osc_period: (8.0, 16.0),
            dip_depth: (6.0, 13.0),
            dip_onset: (5, 20),
            dip_len: (8, 20),
            outliers: 7,
            noise_sd: 0.4,
        }
    }
}

impl CruiseConfig {
    fn validate(&self) -> Result<()> {
        if self.n_traj < 2 || self.len < 8 {
            return Err(Error::InvalidParams(
                "cruise scenario needs n_traj >= 2 and len >= 8".into(),
            ));
        }
        if self.outliers >= self.n_traj {
            return Err(Error::InvalidParams(format!(
                "{} outliers in {} trajectories",
                self.outliers, self.n_traj
            )));
        }
        if self.base_band.0 > self.base_band.1
            || self.dip_depth.0 > self.dip_depth.1
            || self.dip_onset.0 > self.dip_onset.1
            || self.dip_len.0 > self.dip_len.1
        {
            return Err(Error::InvalidParams("inverted range in cruise config".into()));
        }
        if self.dip_onset.1 + self.dip_len.1 >= self.len {
            return Err(Error::InvalidParams(
                "dip can run past the trajectory end".into(),
            ));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::InvalidParams("negative noise".into()));
        }
        Ok(())
    }

    /// Lowest value a non-outlier regular trajectory can reach.
    pub fn regular_floor(&self) -> f64 {
        self.base_band.0 - self.osc_amp.1 - self.noise_sd
    }

    /// Highest dip bottom a non-outlier anomalous trajectory can have.
    pub fn anomaly_ceiling(&self) -> f64 {
        self.base_band.0 - self.dip_depth.0 + self.noise_sd
    }

    /// A formula separating non-outlier classes by construction: regular
    /// trajectories stay above the midpoint between the regular floor and
    /// the anomaly ceiling for the whole horizon, anomalous ones dip below.
    pub fn oracle_formula(&self) -> Formula {
        let threshold = 0.5 * (self.regular_floor() + self.anomaly_ceiling());
        Formula::globally(
            Interval::bounded(0, self.len - 1).expect("len >= 1"),
            Formula::atom(0, Comparison::Ge, threshold),
        )
    }
}

/// Generates the cruise-control set. Labels alternate by index; the last
/// `outliers` trajectories get borderline dips. Deterministic per seed.
pub fn gen_cruise(config: &CruiseConfig, seed: u64) -> Result<LabeledSet> {
    config.validate()?;
    let boundary = 0.5 * (config.regular_floor() + config.anomaly_ceiling());
    let trajectories: Vec<Trajectory> = (0..config.n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(indexed(seed, i as u64));
            let label = (i % 2) as u8;
            let outlier = i >= config.n_traj - config.outliers;

            let level = rng.gen_range(config.base_band.0..=config.base_band.1);
            let amp = rng.gen_range(config.osc_amp.0..=config.osc_amp.1);
            let period = rng.gen_range(config.osc_period.0..=config.osc_period.1);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);

            // Regular trajectories have no dip; anomalous ones dip below the
            // band. Outliers of either class dip to just around the class
            // boundary instead.
            let dip_target = if outlier {
                Some(rng.gen_range(boundary - 0.8..=boundary + 0.8))
            } else if label == 1 {
                Some(config.base_band.0 - rng.gen_range(config.dip_depth.0..=config.dip_depth.1))
            } else {
                None
            };
            let onset = rng.gen_range(config.dip_onset.0..=config.dip_onset.1);
            let dip_len = rng.gen_range(config.dip_len.0..=config.dip_len.1);

            let values: Vec<Vec<f64>> = (0..config.len)
                .map(|t| {
                    let base =
                        level + amp * (std::f64::consts::TAU * t as f64 / period + phase).sin();
                    let v = match dip_target {
                        Some(target) if t >= onset && t < onset + dip_len => {
                            let w = (std::f64::consts::PI * (t - onset) as f64
                                / (dip_len - 1).max(1) as f64)
                                .sin();
                            base * (1.0 - w) + target * w
                        }
                        _ => base,
                    };
                    vec![v + rng.gen_range(-config.noise_sd..=config.noise_sd)]
                })
                .collect();
            Trajectory::new(values, 1.0, 0.0)
        })
        .collect::<Result<_>>()?;

    let labels: Vec<u8> = (0..config.n_traj).map(|i| (i % 2) as u8).collect();
    LabeledSet::new(trajectories, labels)
}

/// Maritime scenario: two-dimensional vessel tracks. Regular vessels follow
/// the waypoint route; anomalous vessels split between two deviation modes,
/// each violating a different half of the reference behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaritimeConfig {
    pub n_traj: usize,
    pub len: usize,
    /// Route of (time fraction, value) waypoints for the east-west
    /// coordinate x_0.
    pub route_x0: Vec<(f64, f64)>,
    /// Waypoints for the south-north coordinate x_1.
    pub route_x1: Vec<(f64, f64)>,
    /// Mode-A anomalies: x_1 stalls at this latitude.
    pub stall_level: f64,
    /// Mode-B anomalies: x_0 drifts back to this coordinate.
    pub drift_level: f64,
    /// Time fraction where mode-B drift begins.
    pub drift_onset: f64,
    /// Half-width of the uniform observation noise.
    pub noise_sd: f64,
}

impl Default for MaritimeConfig {
    fn default() -> Self {
        MaritimeConfig {
            n_traj: 2000,
            len: 61,
            route_x0: vec![(0.0, 25.0), (0.65, 12.0), (1.0, 12.0)],
            route_x1: vec![(0.0, 10.0), (0.8, 40.0), (1.0, 45.0)],
            stall_level: 23.0,
            drift_level: 25.0,
            drift_onset: 0.58,
            noise_sd: 0.7,
        }
    }
}

impl MaritimeConfig {
    pub fn dims(&self) -> usize {
        2
    }

    fn validate(&self) -> Result<()> {
        if self.n_traj < 2 || self.len < 8 {
            return Err(Error::InvalidParams(
                "maritime scenario needs n_traj >= 2 and len >= 8".into(),
            ));
        }
        for route in [&self.route_x0, &self.route_x1] {
            if route.len() < 2 {
                return Err(Error::InvalidParams("route needs >= 2 waypoints".into()));
            }
            if route.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidParams(
                    "route fractions must be strictly increasing".into(),
                ));
            }
        }
        if !(0.0..1.0).contains(&self.drift_onset) {
            return Err(Error::InvalidParams("drift onset outside [0,1)".into()));
        }
        Ok(())
    }
}

fn route_value(route: &[(f64, f64)], frac: f64) -> f64 {
    if frac <= route[0].0 {
        return route[0].1;
    }
    for w in route.windows(2) {
        let ((f0, v0), (f1, v1)) = (w[0], w[1]);
        if frac <= f1 {
            let t = (frac - f0) / (f1 - f0);
            return v0 + t * (v1 - v0);
        }
    }
    route.last().unwrap().1
}

/// Generates the maritime set. Anomalies alternate between the latitude
/// stall and the eastward drift, so each mode is half of the anomalous
/// class. Deterministic per seed.
pub fn gen_maritime(config: &MaritimeConfig, seed: u64) -> Result<LabeledSet> {
    config.validate()?;
    let trajectories: Vec<Trajectory> = (0..config.n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(indexed(seed, i as u64));
            let label = (i % 2) as u8;
            // Every second anomaly stalls; the others drift.
            let stall_mode = (i / 2) % 2 == 0;
            let jitter0 = rng.gen_range(-0.8..0.8);
            let jitter1 = rng.gen_range(-0.8..0.8);

            let values: Vec<Vec<f64>> = (0..config.len)
                .map(|t| {
                    let frac = t as f64 / (config.len - 1) as f64;
                    let mut x0 = route_value(&config.route_x0, frac) + jitter0;
                    let mut x1 = route_value(&config.route_x1, frac) + jitter1;
                    if label == 1 {
                        if stall_mode {
                            // Latitude saturates below the harbour approach.
                            x1 = x1.min(config.stall_level + jitter1);
                        } else if frac >= config.drift_onset {
                            // Eastward drift back out of the corridor.
                            let w = (frac - config.drift_onset) / (1.0 - config.drift_onset);
                            let target = config.drift_level + jitter0;
                            x0 = x0 * (1.0 - w) + target * w;
                        }
                    }
                    vec![
                        x0 + rng.gen_range(-config.noise_sd..=config.noise_sd),
                        x1 + rng.gen_range(-config.noise_sd..=config.noise_sd),
                    ]
                })
                .collect();
            Trajectory::new(values, 1.0, 0.0)
        })
        .collect::<Result<_>>()?;

    let labels: Vec<u8> = (0..config.n_traj).map(|i| (i % 2) as u8).collect();
    LabeledSet::new(trajectories, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::eval_boolean;

    #[test]
    fn cruise_defaults_are_balanced() {
        let set = gen_cruise(&CruiseConfig::default(), 5).unwrap();
        assert_eq!(set.len(), 200);
        assert_eq!(set.labels().iter().filter(|&&l| l == 1).count(), 100);
        assert_eq!(set.dims(), 1);
        assert_eq!(set.trajectory_len(), 48);
    }

    #[test]
    fn cruise_oracle_separates_non_outliers() {
        let config = CruiseConfig::default();
        for seed in [0, 7, 99] {
            let set = gen_cruise(&config, seed).unwrap();
            let oracle = config.oracle_formula();
            for (i, (tr, label)) in set.iter().enumerate() {
                if i >= config.n_traj - config.outliers {
                    continue; // borderline by construction
                }
                let sat = eval_boolean(&oracle, tr, 0).unwrap();
                assert_eq!(
                    sat,
                    label == 0,
                    "seed {seed}, trajectory {i} (label {label}) misclassified by oracle"
                );
            }
        }
    }

    #[test]
    fn cruise_values_stay_in_plausible_band() {
        let set = gen_cruise(&CruiseConfig::default(), 3).unwrap();
        for tr in set.trajectories() {
            for v in tr.dimension(0) {
                assert!((15.0..=45.0).contains(&v), "value {v} outside 15..45");
            }
        }
    }

    #[test]
    fn cruise_is_deterministic() {
        let a = gen_cruise(&CruiseConfig::default(), 11).unwrap();
        let b = gen_cruise(&CruiseConfig::default(), 11).unwrap();
        assert_eq!(a, b);
        let c = gen_cruise(&CruiseConfig::default(), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn maritime_defaults_are_balanced_two_dim() {
        let config = MaritimeConfig {
            n_traj: 200, // keep the unit test quick
            ..MaritimeConfig::default()
        };
        let set = gen_maritime(&config, 2).unwrap();
        assert_eq!(set.len(), 200);
        assert_eq!(set.dims(), 2);
        assert_eq!(set.labels().iter().filter(|&&l| l == 1).count(), 100);
    }

    #[test]
    fn maritime_anomaly_modes_split_evenly() {
        let config = MaritimeConfig {
            n_traj: 400,
            ..MaritimeConfig::default()
        };
        let set = gen_maritime(&config, 8).unwrap();
        // Stall-mode anomalies never reach the harbour latitude in-window.
        let probe = Formula::parse("F[21,51] x_1 >= 28.38").unwrap();
        let mut stalled = 0;
        let mut total = 0;
        for (tr, label) in set.iter() {
            if label != 1 {
                continue;
            }
            total += 1;
            if !eval_boolean(&probe, tr, 0).unwrap() {
                stalled += 1;
            }
        }
        assert_eq!(total, 200);
        assert_eq!(stalled, 100, "stall mode must be half the anomalies");
    }

    #[test]
    fn maritime_regular_follows_reference_behaviour() {
        let config = MaritimeConfig {
            n_traj: 100,
            ..MaritimeConfig::default()
        };
        let set = gen_maritime(&config, 21).unwrap();
        let reference =
            Formula::parse("F[21,51] x_1 >= 28.38 and G[35,inf] x_0 <= 18.8").unwrap();
        for (tr, label) in set.iter() {
            let sat = eval_boolean(&reference, tr, 0).unwrap();
            assert_eq!(sat, label == 0, "label {label}");
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let config = CruiseConfig {
            dip_onset: (40, 45),
            ..CruiseConfig::default()
        };
        assert!(gen_cruise(&config, 0).is_err());
        let config = MaritimeConfig {
            route_x0: vec![(0.0, 1.0)],
            ..MaritimeConfig::default()
        };
        assert!(gen_maritime(&config, 0).is_err());
    }
}
