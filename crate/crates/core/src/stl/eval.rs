//! Boolean and quantitative semantics.
//!
//! Both evaluators share a memoized per-(node, time) table so that nested
//! temporal operators stay linear in the total window work instead of
//! exploding combinatorially. The Boolean evaluator is a genuinely separate
//! implementation of the satisfaction relation, not a sign read-out of the
//! robustness — the sign link between the two is a tested property, not a
//! definition.

use super::{Comparison, Formula, Interval};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Robustness degree of a formula on a trajectory at a time index.
///
/// The value is an extended real: `true` has robustness `+inf`, and negation
/// can produce `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessValue {
    pub value: f64,
    pub time: usize,
}

/// Quantitative semantics at time index `t`.
pub fn eval_robustness(phi: &Formula, xi: &Trajectory, t: usize) -> Result<RobustnessValue> {
    validate(phi, xi, t)?;
    let nodes = index_nodes(phi);
    let mut ev = RobustnessEval {
        nodes: &nodes,
        xi,
        memo: vec![vec![f64::NAN; xi.len()]; nodes.len()],
    };
    let value = ev.rob(0, t)?;
    Ok(RobustnessValue { value, time: t })
}

/// Robustness at the conventional evaluation time `t = 0`.
pub fn robustness_at_zero(phi: &Formula, xi: &Trajectory) -> Result<f64> {
    Ok(eval_robustness(phi, xi, 0)?.value)
}

/// Boolean satisfaction at time index `t`.
pub fn eval_boolean(phi: &Formula, xi: &Trajectory, t: usize) -> Result<bool> {
    validate(phi, xi, t)?;
    let nodes = index_nodes(phi);
    let mut ev = BooleanEval {
        nodes: &nodes,
        xi,
        memo: vec![vec![UNSET; xi.len()]; nodes.len()],
    };
    ev.sat(0, t)
}

fn validate(phi: &Formula, xi: &Trajectory, t: usize) -> Result<()> {
    if t >= xi.len() {
        return Err(Error::TimeOutOfRange { t, len: xi.len() });
    }
    if let Some(max_var) = phi.max_var_index() {
        if max_var >= xi.dims() {
            return Err(Error::VarOutOfRange {
                var: max_var,
                dims: xi.dims(),
            });
        }
    }
    Ok(())
}

/// Flattened AST in pre-order; child links by index.
struct Node<'a> {
    formula: &'a Formula,
    left: usize,
    right: usize,
}

fn index_nodes(phi: &Formula) -> Vec<Node<'_>> {
    fn walk<'a>(phi: &'a Formula, nodes: &mut Vec<Node<'a>>) -> usize {
        let id = nodes.len();
        nodes.push(Node {
            formula: phi,
            left: usize::MAX,
            right: usize::MAX,
        });
        match phi {
            Formula::True | Formula::Atom { .. } => {}
            Formula::Not(x) | Formula::Eventually(_, x) | Formula::Globally(_, x) => {
                let l = walk(x, nodes);
                nodes[id].left = l;
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                let l = walk(a, nodes);
                let r = walk(b, nodes);
                nodes[id].left = l;
                nodes[id].right = r;
            }
        }
        id
    }
    let mut nodes = Vec::with_capacity(phi.node_count());
    walk(phi, &mut nodes);
    nodes
}

/// Clipped window `[t+lo, min(t+hi, T-1)]`; error when empty.
fn window(interval: &Interval, t: usize, len: usize) -> Result<(usize, usize)> {
    let lo = t.saturating_add(interval.lo());
    let hi = match interval.hi() {
        Some(b) => t.saturating_add(b).min(len - 1),
        None => len - 1,
    };
    if lo > hi || lo >= len {
        return Err(Error::EmptyWindow {
            lo: interval.lo(),
            hi: interval
                .hi()
                .map_or_else(|| "inf".to_string(), |b| b.to_string()),
            t,
            len,
        });
    }
    Ok((lo, hi))
}

struct RobustnessEval<'a> {
    nodes: &'a [Node<'a>],
    xi: &'a Trajectory,
    memo: Vec<Vec<f64>>,
}

impl RobustnessEval<'_> {
    fn rob(&mut self, id: usize, t: usize) -> Result<f64> {
        let cached = self.memo[id][t];
        if !cached.is_nan() {
            return Ok(cached);
        }
        let node = &self.nodes[id];
        let (left, right) = (node.left, node.right);
        let value = match node.formula {
            Formula::True => f64::INFINITY,
            Formula::Atom {
                var,
                cmp,
                threshold,
            } => {
                let x = self.xi.value(t, *var);
                match cmp {
                    Comparison::Ge => x - threshold,
                    Comparison::Le => threshold - x,
                }
            }
            Formula::Not(_) => -self.rob(left, t)?,
            Formula::And(..) => self.rob(left, t)?.min(self.rob(right, t)?),
            Formula::Or(..) => self.rob(left, t)?.max(self.rob(right, t)?),
            Formula::Eventually(i, _) => {
                let (lo, hi) = window(i, t, self.xi.len())?;
                let mut best = f64::NEG_INFINITY;
                for u in lo..=hi {
                    best = best.max(self.rob(left, u)?);
                }
                best
            }
            Formula::Globally(i, _) => {
                let (lo, hi) = window(i, t, self.xi.len())?;
                let mut worst = f64::INFINITY;
                for u in lo..=hi {
                    worst = worst.min(self.rob(left, u)?);
                }
                worst
            }
            Formula::Until(i, _, _) => {
                let (lo, hi) = window(i, t, self.xi.len())?;
                // Running minimum of the left operand over [t, t'].
                let mut left_min = f64::INFINITY;
                for u in t..lo {
                    left_min = left_min.min(self.rob(left, u)?);
                }
                let mut best = f64::NEG_INFINITY;
                for tp in lo..=hi {
                    left_min = left_min.min(self.rob(left, tp)?);
                    best = best.max(self.rob(right, tp)?.min(left_min));
                }
                best
            }
        };
        self.memo[id][t] = value;
        Ok(value)
    }
}

const UNSET: u8 = 0;
const FALSE: u8 = 1;
const TRUE: u8 = 2;

struct BooleanEval<'a> {
    nodes: &'a [Node<'a>],
    xi: &'a Trajectory,
    memo: Vec<Vec<u8>>,
}

impl BooleanEval<'_> {
    fn sat(&mut self, id: usize, t: usize) -> Result<bool> {
        match self.memo[id][t] {
            TRUE => return Ok(true),
            FALSE => return Ok(false),
            _ => {}
        }
        let node = &self.nodes[id];
        let (left, right) = (node.left, node.right);
        // Evaluated strictly (no short-circuit) so that out-of-window errors
        // surface identically to the quantitative path.
        let value = match node.formula {
            Formula::True => true,
            Formula::Atom {
                var,
                cmp,
                threshold,
            } => {
                let x = self.xi.value(t, *var);
                match cmp {
                    Comparison::Ge => x >= *threshold,
                    Comparison::Le => x <= *threshold,
                }
            }
            Formula::Not(_) => !self.sat(left, t)?,
            Formula::And(..) => {
                let a = self.sat(left, t)?;
                let b = self.sat(right, t)?;
                a && b
            }
            Formula::Or(..) => {
                let a = self.sat(left, t)?;
                let b = self.sat(right, t)?;
                a || b
            }
            Formula::Eventually(i, _) => {
                let (lo, hi) = window(i, t, self.xi.len())?;
                let mut any = false;
                for u in lo..=hi {
                    any |= self.sat(left, u)?;
                }
                any
            }
            Formula::Globally(i, _) => {
                let (lo, hi) = window(i, t, self.xi.len())?;
                let mut all = true;
                for u in lo..=hi {
                    all &= self.sat(left, u)?;
                }
                all
            }
            Formula::Until(i, _, _) => {
                let (lo, hi) = window(i, t, self.xi.len())?;
                let mut left_holds = true;
                for u in t..lo {
                    left_holds &= self.sat(left, u)?;
                }
                let mut any = false;
                for tp in lo..=hi {
                    left_holds &= self.sat(left, tp)?;
                    any |= self.sat(right, tp)? && left_holds;
                }
                any
            }
        };
        self.memo[id][t] = if value { TRUE } else { FALSE };
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse;

    fn traj(values: &[f64]) -> Trajectory {
        Trajectory::new(values.iter().map(|&v| vec![v]).collect(), 1.0, 0.0).unwrap()
    }

    #[test]
    fn atom_robustness_is_signed_margin() {
        let xi = traj(&[3.0, 3.0, 3.0]);
        let phi = parse("x_0 >= 0").unwrap();
        assert_eq!(robustness_at_zero(&phi, &xi).unwrap(), 3.0);
        let neg = parse("not x_0 >= 0").unwrap();
        assert_eq!(robustness_at_zero(&neg, &xi).unwrap(), -3.0);
        let le = parse("x_0 <= 10").unwrap();
        assert_eq!(robustness_at_zero(&le, &xi).unwrap(), 7.0);
    }

    #[test]
    fn eventually_takes_window_max() {
        let xi = traj(&[1.0, 5.0, 2.0]);
        let phi = parse("F[0,2] x_0 >= 4").unwrap();
        // max(1-4, 5-4, 2-4) = 1
        assert_eq!(robustness_at_zero(&phi, &xi).unwrap(), 1.0);
        assert!(eval_boolean(&phi, &xi, 0).unwrap());
    }

    #[test]
    fn globally_takes_window_min() {
        let xi = traj(&[1.0, 5.0, 2.0]);
        let phi = parse("G[0,2] x_0 >= 4").unwrap();
        assert_eq!(robustness_at_zero(&phi, &xi).unwrap(), -3.0);
        assert!(!eval_boolean(&phi, &xi, 0).unwrap());
    }

    #[test]
    fn until_follows_the_recursion() {
        // rho(a U[0,2] b, 0) = max over t' of min(b(t'), min_{u<=t'} a(u))
        let xi = traj(&[1.0, 2.0, 3.0]);
        let phi = parse("x_0 >= 0 U[0,2] x_0 >= 2.5").unwrap();
        // t'=0: min(1-2.5, 1) = -1.5 ; t'=1: min(2-2.5, min(1,2)) = -0.5
        // t'=2: min(3-2.5, min(1,2,3)) = 0.5  -> max = 0.5
        assert_eq!(robustness_at_zero(&phi, &xi).unwrap(), 0.5);
        assert!(eval_boolean(&phi, &xi, 0).unwrap());
    }

    #[test]
    fn until_left_prefix_starts_at_t_not_window_start() {
        // Left operand fails before the window opens; until must see it.
        let xi = traj(&[-1.0, 5.0, 5.0]);
        let phi = parse("x_0 >= 0 U[1,2] x_0 >= 1").unwrap();
        // prefix min of (x>=0) over [0,t'] includes t=0 where rho = -1
        assert_eq!(robustness_at_zero(&phi, &xi).unwrap(), -1.0);
        assert!(!eval_boolean(&phi, &xi, 0).unwrap());
    }

    #[test]
    fn true_is_top() {
        let xi = traj(&[0.0, 0.0]);
        assert!(eval_boolean(&Formula::True, &xi, 1).unwrap());
        assert_eq!(
            robustness_at_zero(&Formula::True, &xi).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn unbounded_interval_clips_to_end() {
        let xi = traj(&[5.0, 4.0, 3.0, 2.0]);
        let phi = parse("G[1,inf] x_0 >= 2.5").unwrap();
        assert_eq!(robustness_at_zero(&phi, &xi).unwrap(), -0.5);
        let psi = parse("F[2,inf] x_0 <= 2.5").unwrap();
        assert_eq!(robustness_at_zero(&psi, &xi).unwrap(), 0.5);
    }

    #[test]
    fn empty_window_is_an_error() {
        let xi = traj(&[1.0, 2.0, 3.0]);
        let phi = parse("F[5,7] x_0 >= 0").unwrap();
        assert!(matches!(
            robustness_at_zero(&phi, &xi),
            Err(Error::EmptyWindow { .. })
        ));
        assert!(matches!(
            eval_boolean(&phi, &xi, 0),
            Err(Error::EmptyWindow { .. })
        ));
        // Same interval is fine when the trajectory is long enough.
        let xi = traj(&[0.0; 8]);
        assert!(robustness_at_zero(&phi, &xi).is_ok());
    }

    #[test]
    fn variable_out_of_range_is_an_error() {
        let xi = traj(&[1.0, 2.0]);
        let phi = parse("x_3 >= 0").unwrap();
        assert!(matches!(
            robustness_at_zero(&phi, &xi),
            Err(Error::VarOutOfRange { var: 3, dims: 1 })
        ));
    }

    #[test]
    fn time_out_of_range_is_an_error() {
        let xi = traj(&[1.0, 2.0]);
        let phi = parse("x_0 >= 0").unwrap();
        assert!(matches!(
            eval_robustness(&phi, &xi, 2),
            Err(Error::TimeOutOfRange { t: 2, len: 2 })
        ));
    }

    #[test]
    fn evaluation_time_other_than_zero() {
        let xi = traj(&[1.0, 5.0, 2.0]);
        let phi = parse("x_0 >= 4").unwrap();
        let r = eval_robustness(&phi, &xi, 1).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.time, 1);
    }

    #[test]
    fn negation_flips_robustness_exactly() {
        let xi = traj(&[1.25, -3.5, 0.125]);
        for text in ["F[0,2] x_0 >= 0.3", "x_0 <= 1 U[0,2] x_0 >= -1"] {
            let phi = parse(text).unwrap();
            let r = robustness_at_zero(&phi, &xi).unwrap();
            let rn = robustness_at_zero(&phi.negate(), &xi).unwrap();
            assert_eq!(rn, -r);
        }
    }
}
