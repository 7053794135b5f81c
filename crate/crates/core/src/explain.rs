//! Local and global explanations.
//!
//! A local explanation ranks the concept bank by a trajectory's pooled
//! attention, keeps a small subset that is mutually dissimilar in embedding
//! space, and attaches each formula's robustness on the trajectory as a
//! positive or negative witness. Global explanations pool the top-attention
//! concepts of a whole class, deduplicate them, and condense the survivors
//! into one disjunction. Post-processing shifts thresholds (and negates if
//! needed) so the final formula is positively satisfied by the class it
//! describes and violated by the other.

use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::AttentionRecord;
use crate::concepts::ConceptBank;
use crate::error::{Error, Result};
use crate::kernel::kernel_similarity;
use crate::stl::{robustness_at_zero, Formula};
use crate::trajectory::{LabeledSet, Trajectory};

pub const DEFAULT_K_TOP: usize = 3;
pub const DEFAULT_SIM_THRESHOLD: f64 = 0.9;
pub const DEFAULT_OUTLIER_ALLOWANCE: f64 = 0.05;
pub const EPSILON_GRID_POINTS: usize = 41;

/// One ranked concept with its witnesses.
#[derive(Debug, Clone, Serialize)]
pub struct ExplanationEntry {
    pub concept_index: usize,
    pub formula: Formula,
    pub attention: f64,
    pub robustness: f64,
}

/// Explanation of a single prediction.
#[derive(Debug, Clone, Serialize)]
pub struct LocalExplanation {
    pub trajectory_id: usize,
    pub predicted_class: u8,
    /// All concepts, ranked by attention weight descending.
    pub entries: Vec<ExplanationEntry>,
    /// Positions into `entries` of the kept diverse subset.
    pub selected: Vec<usize>,
    /// Conjunction of the kept formulae, post-processed when a labeled
    /// reference was supplied.
    pub formula: Formula,
    /// Post-processing outcome, when requested.
    pub shift: Option<ShiftResult>,
}

/// Explanation of one class.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalExplanation {
    pub class: u8,
    /// Number of local explanations that contributed.
    pub contributing: usize,
    /// Argmax-attention formulae before similarity filtering, one per
    /// contributing trajectory.
    pub batch: Vec<Formula>,
    /// Post-processed survivors of the similarity filter.
    pub survivors: Vec<ShiftResult>,
    /// Disjunction of the survivors.
    pub formula: Formula,
}

/// Outcome of threshold-shift post-processing.
#[derive(Debug, Clone, Serialize)]
pub struct ShiftResult {
    /// Accepted shift; `None` when no grid value separates the classes.
    pub epsilon: Option<f64>,
    /// Whether the shifted formula was negated to make the target class
    /// positive.
    pub negated: bool,
    pub formula: Formula,
    /// Robustness sign counts of `formula`: (positive, negative) on the
    /// target class and on the other class. Zeros count in neither bucket.
    pub target_signs: (usize, usize),
    pub other_signs: (usize, usize),
}

/// Labeled reference trajectories for post-processing.
#[derive(Debug, Clone, Copy)]
pub struct Reference<'a> {
    pub target: &'a [Trajectory],
    pub other: &'a [Trajectory],
    pub grid: &'a [f64],
    pub allowance: f64,
}

/// The symmetric 41-point shift grid spanning half the pooled value range.
pub fn default_epsilon_grid(target: &[Trajectory], other: &[Trajectory]) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for tr in target.iter().chain(other) {
        for v in tr.values_flat() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let half = (hi - lo) / 2.0;
    let steps = (EPSILON_GRID_POINTS - 1) / 2;
    (0..EPSILON_GRID_POINTS)
        .map(|k| (k as f64 - steps as f64) * half / steps as f64)
        .collect()
}

fn conjunction(formulas: &[Formula]) -> Formula {
    let mut iter = formulas.iter().cloned();
    let first = iter.next().expect("nonempty selection");
    iter.fold(first, Formula::and)
}

fn disjunction(formulas: &[Formula]) -> Formula {
    let mut iter = formulas.iter().cloned();
    let first = iter.next().expect("nonempty survivors");
    iter.fold(first, Formula::or)
}

/// Ranks concepts by attention, keeps up to `k_top` mutually dissimilar
/// ones, and conjoins them; the result is post-processed when a labeled
/// reference is supplied.
pub fn explain_local(
    attention: &AttentionRecord,
    xi: &Trajectory,
    trajectory_id: usize,
    predicted_class: u8,
    bank: &ConceptBank,
    k_top: usize,
    sim_threshold: f64,
    reference: Option<Reference<'_>>,
) -> Result<LocalExplanation> {
    if bank.is_empty() {
        return Err(Error::EmptyInput("empty concept bank".into()));
    }
    if attention.len() != bank.len() {
        return Err(Error::ShapeMismatch(format!(
            "attention over {} concepts, bank has {}",
            attention.len(),
            bank.len()
        )));
    }
    if k_top == 0 {
        return Err(Error::InvalidParams("k_top must be >= 1".into()));
    }

    let ranking = attention.ranking();
    let robustness = bank.robustness_on(xi)?;

    let entries: Vec<ExplanationEntry> = ranking
        .iter()
        .map(|&i| ExplanationEntry {
            concept_index: i,
            formula: bank.formula(i).clone(),
            attention: attention.weights()[i],
            robustness: robustness[i],
        })
        .collect();

    // Greedy diverse subset in rank order.
    let mut selected: Vec<usize> = Vec::with_capacity(k_top);
    for (pos, entry) in entries.iter().enumerate() {
        if selected.len() == k_top {
            break;
        }
        let candidate = bank.embedding_row(entry.concept_index);
        let mut diverse = true;
        for &kept_pos in &selected {
            let kept = bank.embedding_row(entries[kept_pos].concept_index);
            match kernel_similarity(&candidate, &kept) {
                Ok(sim) if sim < sim_threshold => {}
                Ok(_) => {
                    diverse = false;
                    break;
                }
                Err(_) => {
                    // Degenerate zero embedding: cannot certify diversity.
                    diverse = false;
                    break;
                }
            }
        }
        if diverse {
            selected.push(pos);
        }
    }
    if selected.is_empty() {
        selected.push(0);
    }

    let kept_formulas: Vec<Formula> = selected
        .iter()
        .map(|&pos| entries[pos].formula.clone())
        .collect();
    let raw = conjunction(&kept_formulas);
    let (formula, shift) = match reference {
        Some(r) => {
            let result = postprocess(&raw, r.target, r.other, r.grid, r.allowance)?;
            (result.formula.clone(), Some(result))
        }
        None => (raw, None),
    };

    Ok(LocalExplanation {
        trajectory_id,
        predicted_class,
        entries,
        selected,
        formula,
        shift,
    })
}

/// Pools each class trajectory's argmax-attention concept, filters the batch
/// by embedding similarity (ordered by frequency, then mean attention), and
/// post-processes and disjoins the survivors.
pub fn explain_global(
    locals: &[LocalExplanation],
    class: u8,
    bank: &ConceptBank,
    sim_threshold: f64,
    reference: Reference<'_>,
) -> Result<GlobalExplanation> {
    let members: Vec<&LocalExplanation> = locals
        .iter()
        .filter(|l| l.predicted_class == class)
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no local explanations for class {class}"
        )));
    }

    let batch: Vec<&ExplanationEntry> = members.iter().map(|l| &l.entries[0]).collect();

    // Group identical formulae, tracking frequency and mean attention.
    struct Group {
        concept_index: usize,
        count: usize,
        attention_sum: f64,
        first_seen: usize,
    }
    let mut groups: Vec<Group> = Vec::new();
    for (i, entry) in batch.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|g| g.concept_index == entry.concept_index)
        {
            Some(g) => {
                g.count += 1;
                g.attention_sum += entry.attention;
            }
            None => groups.push(Group {
                concept_index: entry.concept_index,
                count: 1,
                attention_sum: entry.attention,
                first_seen: i,
            }),
        }
    }
    groups.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then((b.attention_sum / b.count as f64).total_cmp(&(a.attention_sum / a.count as f64)))
            .then(a.first_seen.cmp(&b.first_seen))
    });

    // Greedy similarity filter over the grouped candidates.
    let mut kept: Vec<usize> = Vec::new();
    for g in &groups {
        let candidate = bank.embedding_row(g.concept_index);
        let diverse = kept.iter().all(|&k| {
            let kept_emb = bank.embedding_row(k);
            matches!(kernel_similarity(&candidate, &kept_emb), Ok(sim) if sim < sim_threshold)
        });
        if diverse {
            kept.push(g.concept_index);
        }
    }
    if kept.is_empty() {
        kept.push(groups[0].concept_index);
    }

    let survivors: Vec<ShiftResult> = kept
        .iter()
        .map(|&i| {
            postprocess(
                bank.formula(i),
                reference.target,
                reference.other,
                reference.grid,
                reference.allowance,
            )
        })
        .collect::<Result<_>>()?;

    let formula = disjunction(
        &survivors
            .iter()
            .map(|s| s.formula.clone())
            .collect::<Vec<_>>(),
    );

    Ok(GlobalExplanation {
        class,
        contributing: members.len(),
        batch: batch.iter().map(|e| e.formula.clone()).collect(),
        survivors,
        formula,
    })
}

fn sign_counts(phi: &Formula, set: &[Trajectory]) -> Result<(usize, usize)> {
    let signs: Vec<f64> = set
        .par_iter()
        .map(|tr| robustness_at_zero(phi, tr))
        .collect::<Result<_>>()?;
    let pos = signs.iter().filter(|&&r| r > 0.0).count();
    let neg = signs.iter().filter(|&&r| r < 0.0).count();
    Ok((pos, neg))
}

/// Shifts all thresholds by the smallest grid epsilon that gives the target
/// class one robustness sign and the other class the opposite sign (up to
/// the outlier allowance), negates if the target class came out negative,
/// and simplifies. When no epsilon qualifies the formula is returned
/// unchanged with the sign summary.
pub fn postprocess(
    phi: &Formula,
    target: &[Trajectory],
    other: &[Trajectory],
    grid: &[f64],
    allowance: f64,
) -> Result<ShiftResult> {
    if target.is_empty() || other.is_empty() {
        return Err(Error::EmptyInput(
            "post-processing needs both reference classes".into(),
        ));
    }
    if grid.is_empty() {
        return Err(Error::EmptyInput("empty epsilon grid".into()));
    }
    if !(0.0..1.0).contains(&allowance) {
        return Err(Error::InvalidParams(format!(
            "allowance must be in [0,1), got {allowance}"
        )));
    }

    // Smallest magnitude first; negative before positive on ties.
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));

    let need_target = ((1.0 - allowance) * target.len() as f64).ceil() as usize;
    let need_other = ((1.0 - allowance) * other.len() as f64).ceil() as usize;

    for &eps in &order {
        let shifted = phi.shift_thresholds(eps);
        let (t_pos, t_neg) = sign_counts(&shifted, target)?;
        let (o_pos, o_neg) = sign_counts(&shifted, other)?;

        let positive_separates = t_pos >= need_target && o_neg >= need_other;
        let negative_separates = t_neg >= need_target && o_pos >= need_other;
        if !(positive_separates || negative_separates) {
            continue;
        }

        let negated = negative_separates && !positive_separates;
        let oriented = if negated { shifted.negate() } else { shifted };
        let formula = oriented.simplify();
        let target_signs = sign_counts(&formula, target)?;
        let other_signs = sign_counts(&formula, other)?;
        return Ok(ShiftResult {
            epsilon: Some(eps),
            negated,
            formula,
            target_signs,
            other_signs,
        });
    }

    let target_signs = sign_counts(phi, target)?;
    let other_signs = sign_counts(phi, other)?;
    Ok(ShiftResult {
        epsilon: None,
        negated: false,
        formula: phi.clone(),
        target_signs,
        other_signs,
    })
}

/// One row of a robustness report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportRow {
    pub traj_id: usize,
    pub class: u8,
    pub robustness: f64,
}

/// Per-trajectory robustness of a formula over a labeled set, at time 0.
pub fn robustness_report(phi: &Formula, set: &LabeledSet) -> Result<Vec<ReportRow>> {
    let values: Vec<f64> = set
        .trajectories()
        .par_iter()
        .map(|tr| robustness_at_zero(phi, tr))
        .collect::<Result<_>>()?;
    Ok(values
        .into_iter()
        .zip(set.labels())
        .enumerate()
        .map(|(traj_id, (robustness, &class))| ReportRow {
            traj_id,
            class,
            robustness,
        })
        .collect())
}

pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("traj_id,class,robustness\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.traj_id, r.class, r.robustness));
    }
    out
}

/// Fraction of `class` rows with positive robustness and of other rows with
/// negative robustness.
pub fn sign_separation(rows: &[ReportRow], class: u8) -> (f64, f64) {
    let own: Vec<&ReportRow> = rows.iter().filter(|r| r.class == class).collect();
    let other: Vec<&ReportRow> = rows.iter().filter(|r| r.class != class).collect();
    let own_pos = own.iter().filter(|r| r.robustness > 0.0).count();
    let other_neg = other.iter().filter(|r| r.robustness < 0.0).count();
    (
        own_pos as f64 / own.len().max(1) as f64,
        other_neg as f64 / other.len().max(1) as f64,
    )
}

/// Self-contained scatter plot of a robustness report: trajectory index on
/// the x axis, robustness on the y axis, one dot per trajectory colored by
/// class, with a dashed zero line.
pub fn report_to_svg(rows: &[ReportRow], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const MARGIN: f64 = 42.0;

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        lo = lo.min(r.robustness);
        hi = hi.max(r.robustness);
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    if (hi - lo).abs() < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let n = rows.len().max(1) as f64;

    let x = |i: usize| MARGIN + (i as f64 + 0.5) / n * (W - 2.0 * MARGIN);
    let y = |v: f64| H - MARGIN - (v - lo) / (hi - lo) * (H - 2.0 * MARGIN);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        svg_escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        r = W - MARGIN,
        t = MARGIN,
        b = H - MARGIN
    ));
    // zero line
    if lo < 0.0 && hi > 0.0 {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{z}\" x2=\"{}\" y2=\"{z}\" stroke=\"gray\" \
             stroke-dasharray=\"4 3\"/>\n",
            MARGIN,
            W - MARGIN,
            z = y(0.0)
        ));
    }
    for (i, r) in rows.iter().enumerate() {
        let color = if r.class == 0 { "#1f77b4" } else { "#d62728" };
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.4\" fill=\"{}\" fill-opacity=\"0.75\"/>\n",
            x(i),
            y(r.robustness),
            color
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">robustness</text>\n",
        6.0,
        MARGIN - 8.0
    ));
    svg.push_str("</svg>\n");
    svg
}

fn svg_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
