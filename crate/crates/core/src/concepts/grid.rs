//! Parameter grids and template instantiation.

use super::templates::Template;
use crate::error::{Error, Result};
use crate::stl::{Formula, Interval};
use crate::trajectory::Trajectory;

/// Quantile levels (percent) of pooled probe values used as thresholds.
pub const THRESHOLD_QUANTILES: [f64; 10] = [5.0, 15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 75.0, 85.0, 95.0];

/// Candidate parameter values: per-variable thresholds and a shared interval
/// list.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    thresholds_per_var: Vec<Vec<f64>>,
    intervals: Vec<Interval>,
}

impl ParameterGrid {
    pub fn new(thresholds_per_var: Vec<Vec<f64>>, intervals: Vec<Interval>) -> Result<Self> {
        if thresholds_per_var.is_empty() || thresholds_per_var.iter().any(|g| g.is_empty()) {
            return Err(Error::EmptyInput("empty threshold grid".into()));
        }
        if intervals.is_empty() {
            return Err(Error::EmptyInput("empty interval grid".into()));
        }
        if thresholds_per_var
            .iter()
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidParams("non-finite threshold".into()));
        }
        Ok(ParameterGrid {
            thresholds_per_var,
            intervals,
        })
    }

    /// Grid derived from probe trajectories: thresholds at fixed quantiles of
    /// the pooled values per variable; interval anchors at quarters of the
    /// trajectory length, plus an unbounded end per anchor.
    pub fn from_probes(probes: &[Trajectory]) -> Result<Self> {
        if probes.is_empty() {
            return Err(Error::EmptyInput("no probe trajectories".into()));
        }
        let dims = probes[0].dims();
        let len = probes[0].len();

        let mut thresholds_per_var = Vec::with_capacity(dims);
        for d in 0..dims {
            let mut pooled: Vec<f64> = probes
                .iter()
                .flat_map(|tr| tr.dimension(d).collect::<Vec<_>>())
                .collect();
            pooled.sort_by(f64::total_cmp);
            let mut qs: Vec<f64> = THRESHOLD_QUANTILES
                .iter()
                .map(|&p| {
                    let idx = ((p / 100.0) * (pooled.len() - 1) as f64).round() as usize;
                    pooled[idx]
                })
                .collect();
            qs.dedup();
            thresholds_per_var.push(qs);
        }

        Ok(ParameterGrid {
            thresholds_per_var,
            intervals: interval_grid(len),
        })
    }

    pub fn thresholds(&self, var: usize) -> &[f64] {
        &self.thresholds_per_var[var]
    }

    pub fn thresholds_per_var(&self) -> &[Vec<f64>] {
        &self.thresholds_per_var
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn n_vars(&self) -> usize {
        self.thresholds_per_var.len()
    }
}

/// Interval anchors `{0, T/4, T/2, 3T/4} x {T/4, T/2, 3T/4, T-1}` (valid
/// pairs only) plus an unbounded end per anchor.
fn interval_grid(len: usize) -> Vec<Interval> {
    let t = len.max(2);
    let quarter = |k: usize| k * (t - 1) / 4;
    let los = [0, quarter(1), quarter(2), quarter(3)];
    let his = [quarter(1), quarter(2), quarter(3), t - 1];

    let mut out = Vec::new();
    for &lo in &los {
        for &hi in &his {
            if lo <= hi {
                let iv = Interval::bounded(lo, hi).expect("validated bounds");
                if !out.contains(&iv) {
                    out.push(iv);
                }
            }
        }
    }
    for &lo in &los {
        let iv = Interval::unbounded(lo);
        if !out.contains(&iv) {
            out.push(iv);
        }
    }
    out
}

/// All grid instantiations of a template: the cartesian product of the
/// per-slot candidate lists. Threshold slots draw from their variable's
/// grid, interval slots from the shared interval list.
pub fn instantiate(template: &Template, grid: &ParameterGrid) -> Result<Vec<Formula>> {
    Ok(instantiate_with_params(template, grid)?
        .into_iter()
        .map(|(phi, _, _)| phi)
        .collect())
}

/// Like [`instantiate`], also returning each instantiation's parameter
/// assignment (thresholds and intervals in pre-order).
pub fn instantiate_with_params(
    template: &Template,
    grid: &ParameterGrid,
) -> Result<Vec<(Formula, Vec<f64>, Vec<Interval>)>> {
    let threshold_vars = template.threshold_vars();
    for &var in &threshold_vars {
        if var >= grid.n_vars() {
            return Err(Error::VarOutOfRange {
                var,
                dims: grid.n_vars(),
            });
        }
    }
    let n_iv = template.interval_arity();

    // Odometer over threshold slots then interval slots.
    let slot_sizes: Vec<usize> = threshold_vars
        .iter()
        .map(|&v| grid.thresholds(v).len())
        .chain(std::iter::repeat(grid.intervals().len()).take(n_iv))
        .collect();
    let total: usize = slot_sizes.iter().product();

    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; slot_sizes.len()];
    loop {
        let thresholds: Vec<f64> = threshold_vars
            .iter()
            .enumerate()
            .map(|(slot, &v)| grid.thresholds(v)[digits[slot]])
            .collect();
        let intervals: Vec<Interval> = (0..n_iv)
            .map(|slot| grid.intervals()[digits[threshold_vars.len() + slot]])
            .collect();
        let phi = template.apply(&thresholds, &intervals);
        out.push((phi, thresholds, intervals));

        // Advance the odometer, last slot fastest.
        let mut pos = slot_sizes.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < slot_sizes[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::templates::enumerate_templates;

    fn probe(values: &[f64]) -> Trajectory {
        Trajectory::new(values.iter().map(|&v| vec![v]).collect(), 1.0, 0.0).unwrap()
    }

    #[test]
    fn quantile_grid_tracks_data_scale() {
        let probes = vec![probe(&[0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 100.0])];
        let grid = ParameterGrid::from_probes(&probes).unwrap();
        let th = grid.thresholds(0);
        assert!(th.len() <= 10 && !th.is_empty());
        assert!(th.windows(2).all(|w| w[0] < w[1]));
        assert!(th[0] >= 0.0 && *th.last().unwrap() <= 100.0);
    }

    #[test]
    fn interval_grid_covers_quarters_and_unbounded() {
        let probes = vec![probe(&[0.0; 101])];
        let grid = ParameterGrid::from_probes(&probes).unwrap();
        let ivs = grid.intervals();
        assert!(ivs.contains(&Interval::bounded(0, 25).unwrap()));
        assert!(ivs.contains(&Interval::bounded(75, 100).unwrap()));
        assert!(ivs.contains(&Interval::unbounded(50)));
        assert!(ivs.iter().all(|iv| iv.hi().map_or(true, |h| h <= 100)));
        // 13 bounded pairs + 4 unbounded anchors
        assert_eq!(ivs.len(), 17);
    }

    #[test]
    fn instantiate_atom_template_over_thresholds() {
        let grid = ParameterGrid::new(
            vec![vec![1.0, 2.0, 3.0]],
            vec![Interval::bounded(0, 1).unwrap()],
        )
        .unwrap();
        let atoms = enumerate_templates(1, 1);
        let formulas = instantiate(&atoms[0], &grid).unwrap();
        assert_eq!(formulas.len(), 3);
    }

    #[test]
    fn instantiate_respects_cartesian_bound() {
        let grid = ParameterGrid::new(
            vec![vec![1.0, 2.0, 3.0], vec![5.0, 6.0, 7.0, 8.0]],
            vec![Interval::bounded(0, 1).unwrap()],
        )
        .unwrap();
        // and-template over two different variables: 3 x 4 instantiations
        let ts = enumerate_templates(3, 2);
        let t = ts
            .iter()
            .find(|t| t.id() == "(x_0 <= ?) and (x_1 <= ?)")
            .unwrap();
        let formulas = instantiate(t, &grid).unwrap();
        assert_eq!(formulas.len(), 12);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(ParameterGrid::new(vec![], vec![Interval::unbounded(0)]).is_err());
        assert!(ParameterGrid::new(vec![vec![1.0]], vec![]).is_err());
        assert!(ParameterGrid::new(vec![vec![f64::NAN]], vec![Interval::unbounded(0)]).is_err());
    }

    #[test]
    fn instantiations_are_distinct() {
        let probes = vec![probe(&(0..30).map(|i| i as f64).collect::<Vec<_>>())];
        let grid = ParameterGrid::from_probes(&probes).unwrap();
        for t in enumerate_templates(2, 1) {
            let formulas = instantiate(&t, &grid).unwrap();
            let mut rendered: Vec<String> = formulas.iter().map(|f| f.render()).collect();
            let n = rendered.len();
            rendered.sort();
            rendered.dedup();
            assert_eq!(rendered.len(), n, "{}", t.id());
        }
    }
}
