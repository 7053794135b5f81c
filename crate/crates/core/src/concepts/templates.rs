//! Template enumeration.
//!
//! A template is a formula skeleton whose atom thresholds and temporal
//! intervals are left symbolic. Enumeration grows templates by node count:
//! atoms have one node, unary operators (F, G, not) wrap an (m-1)-node
//! template, and binary operators (and, or, U) join children whose node
//! counts sum to m-1, the operator taking the remaining node. Binary
//! combinations therefore first appear at three nodes. Commutative twins
//! (`a and b` / `b and a`) are deduplicated.

use crate::stl::{Comparison, Formula, Interval};

/// A formula skeleton with symbolic parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    skeleton: Skeleton,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Skeleton {
    Atom { var: usize, cmp: Comparison },
    Not(Box<Skeleton>),
    And(Box<Skeleton>, Box<Skeleton>),
    Or(Box<Skeleton>, Box<Skeleton>),
    Eventually(Box<Skeleton>),
    Globally(Box<Skeleton>),
    Until(Box<Skeleton>, Box<Skeleton>),
}

impl Skeleton {
    fn node_count(&self) -> usize {
        match self {
            Skeleton::Atom { .. } => 1,
            Skeleton::Not(x) | Skeleton::Eventually(x) | Skeleton::Globally(x) => {
                1 + x.node_count()
            }
            Skeleton::And(a, b) | Skeleton::Or(a, b) | Skeleton::Until(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }

    /// Canonical identifier, also used for twin deduplication.
    fn id(&self) -> String {
        match self {
            Skeleton::Atom { var, cmp } => {
                let op = match cmp {
                    Comparison::Le => "<=",
                    Comparison::Ge => ">=",
                };
                format!("x_{var} {op} ?")
            }
            Skeleton::Not(x) => format!("not ({})", x.id()),
            Skeleton::And(a, b) => format!("({}) and ({})", a.id(), b.id()),
            Skeleton::Or(a, b) => format!("({}) or ({})", a.id(), b.id()),
            Skeleton::Eventually(x) => format!("F[?] ({})", x.id()),
            Skeleton::Globally(x) => format!("G[?] ({})", x.id()),
            Skeleton::Until(a, b) => format!("({}) U[?] ({})", a.id(), b.id()),
        }
    }
}

impl Template {
    pub fn node_count(&self) -> usize {
        self.skeleton.node_count()
    }

    /// Canonical textual identifier, e.g. `G[?] (x_0 <= ?)`.
    pub fn id(&self) -> String {
        self.skeleton.id()
    }

    /// Number of symbolic threshold parameters, in pre-order.
    pub fn threshold_arity(&self) -> usize {
        fn count(s: &Skeleton) -> usize {
            match s {
                Skeleton::Atom { .. } => 1,
                Skeleton::Not(x) | Skeleton::Eventually(x) | Skeleton::Globally(x) => count(x),
                Skeleton::And(a, b) | Skeleton::Or(a, b) | Skeleton::Until(a, b) => {
                    count(a) + count(b)
                }
            }
        }
        count(&self.skeleton)
    }

    /// Number of symbolic interval parameters, in pre-order.
    pub fn interval_arity(&self) -> usize {
        fn count(s: &Skeleton) -> usize {
            match s {
                Skeleton::Atom { .. } => 0,
                Skeleton::Not(x) => count(x),
                Skeleton::Eventually(x) | Skeleton::Globally(x) => 1 + count(x),
                Skeleton::And(a, b) | Skeleton::Or(a, b) => count(a) + count(b),
                Skeleton::Until(a, b) => 1 + count(a) + count(b),
            }
        }
        count(&self.skeleton)
    }

    /// Total parameter arity.
    pub fn param_arity(&self) -> usize {
        self.threshold_arity() + self.interval_arity()
    }

    /// Variable index of each threshold slot, in pre-order.
    pub fn threshold_vars(&self) -> Vec<usize> {
        fn walk(s: &Skeleton, out: &mut Vec<usize>) {
            match s {
                Skeleton::Atom { var, .. } => out.push(*var),
                Skeleton::Not(x) | Skeleton::Eventually(x) | Skeleton::Globally(x) => walk(x, out),
                Skeleton::And(a, b) | Skeleton::Or(a, b) | Skeleton::Until(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.skeleton, &mut out);
        out
    }

    /// Fills the symbolic slots in pre-order. Panics if the slices do not
    /// match the arities; callers drive this from the arities above.
    pub fn apply(&self, thresholds: &[f64], intervals: &[Interval]) -> Formula {
        fn build(s: &Skeleton, th: &mut std::slice::Iter<f64>, iv: &mut std::slice::Iter<Interval>) -> Formula {
            match s {
                Skeleton::Atom { var, cmp } => Formula::atom(*var, *cmp, *th.next().expect("threshold slot")),
                Skeleton::Not(x) => Formula::not(build(x, th, iv)),
                Skeleton::And(a, b) => {
                    let fa = build(a, th, iv);
                    let fb = build(b, th, iv);
                    Formula::and(fa, fb)
                }
                Skeleton::Or(a, b) => {
                    let fa = build(a, th, iv);
                    let fb = build(b, th, iv);
                    Formula::or(fa, fb)
                }
                Skeleton::Eventually(x) => {
                    let i = *iv.next().expect("interval slot");
                    Formula::eventually(i, build(x, th, iv))
                }
                Skeleton::Globally(x) => {
                    let i = *iv.next().expect("interval slot");
                    Formula::globally(i, build(x, th, iv))
                }
                Skeleton::Until(a, b) => {
                    let i = *iv.next().expect("interval slot");
                    let fa = build(a, th, iv);
                    let fb = build(b, th, iv);
                    Formula::until(i, fa, fb)
                }
            }
        }
        assert_eq!(thresholds.len(), self.threshold_arity());
        assert_eq!(intervals.len(), self.interval_arity());
        build(&self.skeleton, &mut thresholds.iter(), &mut intervals.iter())
    }
}

/// Enumerates all templates with at most `max_nodes` nodes over `n_vars`
/// signal dimensions, smallest first.
pub fn enumerate_templates(max_nodes: usize, n_vars: usize) -> Vec<Template> {
    assert!(max_nodes >= 1 && n_vars >= 1);
    let mut by_size: Vec<Vec<Skeleton>> = Vec::with_capacity(max_nodes);

    let mut atoms = Vec::with_capacity(2 * n_vars);
    for var in 0..n_vars {
        atoms.push(Skeleton::Atom {
            var,
            cmp: Comparison::Le,
        });
        atoms.push(Skeleton::Atom {
            var,
            cmp: Comparison::Ge,
        });
    }
    by_size.push(atoms);

    for m in 2..=max_nodes {
        let mut bucket = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut push = |s: Skeleton, bucket: &mut Vec<Skeleton>| {
            if seen.insert(canonical_key(&s)) {
                bucket.push(s);
            }
        };

        for prev in &by_size[m - 2] {
            push(Skeleton::Eventually(Box::new(prev.clone())), &mut bucket);
            push(Skeleton::Globally(Box::new(prev.clone())), &mut bucket);
            push(Skeleton::Not(Box::new(prev.clone())), &mut bucket);
        }

        // Children splits (l, r) with l <= r and l + r = m - 1.
        let children = m - 1;
        for l in 1..=children / 2 {
            let r = children - l;
            for a in by_size[l - 1].clone() {
                for b in &by_size[r - 1] {
                    push(Skeleton::And(Box::new(a.clone()), Box::new(b.clone())), &mut bucket);
                    push(Skeleton::Or(Box::new(a.clone()), Box::new(b.clone())), &mut bucket);
                    push(Skeleton::Until(Box::new(a.clone()), Box::new(b.clone())), &mut bucket);
                }
            }
        }
        by_size.push(bucket);
    }

    by_size
        .into_iter()
        .flatten()
        .map(|skeleton| Template { skeleton })
        .collect()
}

/// Key under which commutative twins collide.
fn canonical_key(s: &Skeleton) -> String {
    match s {
        Skeleton::And(a, b) | Skeleton::Or(a, b) => {
            let (ka, kb) = (canonical_key(a), canonical_key(b));
            let (lo, hi) = if ka <= kb { (ka, kb) } else { (kb, ka) };
            let op = if matches!(s, Skeleton::And(..)) { "and" } else { "or" };
            format!("({lo}) {op} ({hi})")
        }
        Skeleton::Not(x) => format!("not ({})", canonical_key(x)),
        Skeleton::Eventually(x) => format!("F ({})", canonical_key(x)),
        Skeleton::Globally(x) => format!("G ({})", canonical_key(x)),
        Skeleton::Until(a, b) => format!("({}) U ({})", canonical_key(a), canonical_key(b)),
        Skeleton::Atom { .. } => s.id(),
    }
}
