//! The STL formula language.
//!
//! Formulae are built from threshold comparisons on single signal dimensions
//! (`x_0 <= 37.3`), Boolean connectives, and interval-decorated temporal
//! operators. Intervals are expressed in sampling steps of the trajectory the
//! formula is evaluated on; an unbounded upper end clips to the trajectory
//! end at evaluation time.

mod eval;
mod parser;

pub use eval::{eval_boolean, eval_robustness, robustness_at_zero, RobustnessValue};
pub use parser::parse;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

use crate::error::{Error, Result};

/// Direction of an atomic threshold comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// `x_i <= c`
    Le,
    /// `x_i >= c`
    Ge,
}

impl Comparison {
    pub fn flipped(self) -> Self {
        match self {
            Comparison::Le => Comparison::Ge,
            Comparison::Ge => Comparison::Le,
        }
    }
}

/// Time window of a temporal operator, in sampling steps.
///
/// `hi == None` is the unbounded sentinel, interpreted as the trajectory end
/// when the formula is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    lo: usize,
    hi: Option<usize>,
}

impl Interval {
    pub fn bounded(lo: usize, hi: usize) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Interval { lo, hi: Some(hi) })
    }

    pub fn unbounded(lo: usize) -> Self {
        Interval { lo, hi: None }
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    /// Upper end, `None` if unbounded.
    pub fn hi(&self) -> Option<usize> {
        self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "[{},{}]", self.lo, hi),
            None => write!(f, "[{},inf]", self.lo),
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        (self.lo, self.hi).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let (lo, hi) = <(usize, Option<usize>)>::deserialize(deserializer)?;
        match hi {
            Some(hi) => Interval::bounded(lo, hi).map_err(serde::de::Error::custom),
            None => Ok(Interval::unbounded(lo)),
        }
    }
}

/// An STL formula over an n-dimensional sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Atom {
        /// 0-based signal dimension.
        var: usize,
        cmp: Comparison,
        threshold: f64,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Globally(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(var: usize, cmp: Comparison, threshold: f64) -> Self {
        Formula::Atom {
            var,
            cmp,
            threshold,
        }
    }

    pub fn not(phi: Formula) -> Self {
        Formula::Not(Box::new(phi))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn eventually(i: Interval, phi: Formula) -> Self {
        Formula::Eventually(i, Box::new(phi))
    }

    pub fn globally(i: Interval, phi: Formula) -> Self {
        Formula::Globally(i, Box::new(phi))
    }

    pub fn until(i: Interval, a: Formula, b: Formula) -> Self {
        Formula::Until(i, Box::new(a), Box::new(b))
    }

    pub fn parse(text: &str) -> Result<Self> {
        parser::parse(text)
    }

    /// Canonical text form; re-parses to a structurally identical AST.
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Number of AST nodes; atoms and `true` count as one.
    pub fn node_count(&self) -> usize {
        match self {
            Formula::True | Formula::Atom { .. } => 1,
            Formula::Not(x) | Formula::Eventually(_, x) | Formula::Globally(_, x) => {
                1 + x.node_count()
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }

    /// Largest variable index referenced, `None` for variable-free formulae.
    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Formula::True => None,
            Formula::Atom { var, .. } => Some(*var),
            Formula::Not(x) | Formula::Eventually(_, x) | Formula::Globally(_, x) => {
                x.max_var_index()
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                a.max_var_index().max(b.max_var_index())
            }
        }
    }

    /// Logical negation with double-negation collapse.
    pub fn negate(&self) -> Formula {
        match self {
            Formula::Not(x) => (**x).clone(),
            other => Formula::not(other.clone()),
        }
    }

    /// Adds `eps` to every atom threshold, regardless of comparison direction.
    pub fn shift_thresholds(&self, eps: f64) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::Atom {
                var,
                cmp,
                threshold,
            } => Formula::atom(*var, *cmp, threshold + eps),
            Formula::Not(x) => Formula::not(x.shift_thresholds(eps)),
            Formula::And(a, b) => {
                Formula::and(a.shift_thresholds(eps), b.shift_thresholds(eps))
            }
            Formula::Or(a, b) => Formula::or(a.shift_thresholds(eps), b.shift_thresholds(eps)),
            Formula::Eventually(i, x) => Formula::eventually(*i, x.shift_thresholds(eps)),
            Formula::Globally(i, x) => Formula::globally(*i, x.shift_thresholds(eps)),
            Formula::Until(i, a, b) => {
                Formula::until(*i, a.shift_thresholds(eps), b.shift_thresholds(eps))
            }
        }
    }

    /// Syntactic simplification by logical equivalences.
    ///
    /// Rewrites never grow the formula and preserve robustness bit-for-bit:
    /// double negation, De Morgan duals (negation pushed through and/or/F/G
    /// down to atoms, where it flips the comparison), and `true`
    /// absorption/identity for conjunction and disjunction.
    pub fn simplify(&self) -> Formula {
        match self {
            Formula::True | Formula::Atom { .. } => self.clone(),
            Formula::Not(x) => {
                let sx = x.simplify();
                let pushed = push_not(&sx);
                if pushed.node_count() <= 1 + sx.node_count() {
                    pushed
                } else {
                    Formula::not(sx)
                }
            }
            Formula::And(a, b) => {
                let sa = a.simplify();
                let sb = b.simplify();
                match (&sa, &sb) {
                    (Formula::True, _) => sb,
                    (_, Formula::True) => sa,
                    _ => Formula::and(sa, sb),
                }
            }
            Formula::Or(a, b) => {
                let sa = a.simplify();
                let sb = b.simplify();
                if matches!(sa, Formula::True) || matches!(sb, Formula::True) {
                    Formula::True
                } else {
                    Formula::or(sa, sb)
                }
            }
            Formula::Eventually(i, x) => Formula::eventually(*i, x.simplify()),
            Formula::Globally(i, x) => Formula::globally(*i, x.simplify()),
            Formula::Until(i, a, b) => Formula::until(*i, a.simplify(), b.simplify()),
        }
    }
}

/// Simplified form of `¬phi` with the negation pushed towards the leaves.
///
/// Stops at `true` and Until, where no shrinking dual exists.
fn push_not(phi: &Formula) -> Formula {
    match phi {
        Formula::Atom {
            var,
            cmp,
            threshold,
        } => Formula::atom(*var, cmp.flipped(), *threshold),
        Formula::Not(x) => (**x).clone(),
        Formula::And(a, b) => Formula::or(push_not(a), push_not(b)),
        Formula::Or(a, b) => Formula::and(push_not(a), push_not(b)),
        Formula::Eventually(i, x) => Formula::globally(*i, push_not(x)),
        Formula::Globally(i, x) => Formula::eventually(*i, push_not(x)),
        other => Formula::not(other.clone()),
    }
}

/// Precedence levels used by the renderer; higher binds tighter.
fn precedence(phi: &Formula) -> u8 {
    match phi {
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        Formula::Until(..) => 3,
        Formula::Not(..) | Formula::Eventually(..) | Formula::Globally(..) => 4,
        Formula::True | Formula::Atom { .. } => 5,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Formula, min_prec: u8) -> fmt::Result {
    if precedence(child) < min_prec {
        write!(f, "({})", child)
    } else {
        write!(f, "{}", child)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::Atom {
                var,
                cmp,
                threshold,
            } => {
                let op = match cmp {
                    Comparison::Le => "<=",
                    Comparison::Ge => ">=",
                };
                write!(f, "x_{} {} {}", var, op, threshold)
            }
            Formula::Not(x) => {
                write!(f, "not ")?;
                write_child(f, x, 4)
            }
            Formula::And(a, b) => {
                write_child(f, a, 2)?;
                write!(f, " and ")?;
                write_child(f, b, 3)
            }
            Formula::Or(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " or ")?;
                write_child(f, b, 2)
            }
            Formula::Until(i, a, b) => {
                write_child(f, a, 3)?;
                write!(f, " U{} ", i)?;
                write_child(f, b, 4)
            }
            Formula::Eventually(i, x) => {
                write!(f, "F{} ({})", i, x)
            }
            Formula::Globally(i, x) => {
                write!(f, "G{} ({})", i, x)
            }
        }
    }
}

impl std::str::FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parser::parse(s)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Formula::parse(&s).map_err(serde::de::Error::custom)
    }
}
