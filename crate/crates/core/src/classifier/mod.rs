//! Cross-attention binary classifier.
//!
//! Trajectory tokens (signal values plus a normalized time channel) form the
//! attention queries; concept embeddings provide keys and values. The
//! softmax attention rows are averaged into a per-concept weight vector that
//! doubles as the explanation signal, the attended context is mean-pooled
//! and classified by a one-hidden-layer MLP with a logistic output.
//! Gradients are analytic and checked against finite differences.

mod io;

pub use io::{load_checkpoint, save_checkpoint, CheckpointMeta};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concepts::ConceptBank;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, substream};
use crate::trajectory::{LabeledSet, Trajectory};

/// Attention weights over the concept bank: non-negative, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord(Vec<f64>);

impl AttentionRecord {
    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the highest-weight concept (lowest index wins ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.0.iter().enumerate() {
            if w > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Concept indices sorted by weight, descending; ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        order.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        order
    }

    #[cfg(test)]
    pub(crate) fn from_weights_for_tests(weights: Vec<f64>) -> Self {
        AttentionRecord(weights)
    }
}

/// Parameter tensors, uniformly shaped as matrices (vectors are n x 1,
/// the output bias is 1 x 1).
pub const PARAM_NAMES: [&str; 10] =
    ["w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w1", "b1", "w2", "b2"];

const W_Q: usize = 0;
const B_Q: usize = 1;
const W_K: usize = 2;
const B_K: usize = 3;
const W_V: usize = 4;
const B_V: usize = 5;
const W1: usize = 6;
const B1: usize = 7;
const W2: usize = 8;
const B2: usize = 9;

/// A full set of parameter-shaped tensors (weights, gradients, or optimizer
/// moments).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    tensors: Vec<DMatrix<f64>>,
}

impl ParamSet {
    fn zeros_like(other: &ParamSet) -> Self {
        ParamSet {
            tensors: other
                .tensors
                .iter()
                .map(|t| DMatrix::zeros(t.nrows(), t.ncols()))
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            *a += b;
        }
    }

    fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            *t *= s;
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&DMatrix<f64>> {
        PARAM_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &DMatrix<f64>)> {
        PARAM_NAMES.iter().copied().zip(self.tensors.iter())
    }

    pub fn names(&self) -> &'static [&'static str] {
        &PARAM_NAMES
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        for (i, t) in self.tensors.iter().enumerate() {
            if t.iter().any(|v| !v.is_finite()) {
                return Some(PARAM_NAMES[i]);
            }
        }
        None
    }
}

/// Network shape hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShapes {
    /// Token feature dimension: signal dims + 1 time channel.
    pub feat_dim: usize,
    /// Concept embedding dimension.
    pub embed_dim: usize,
    /// Attention projection width.
    pub d_att: usize,
    /// MLP hidden width.
    pub hidden: usize,
}

/// Trained or freshly initialized model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    shapes: ModelShapes,
    set: ParamSet,
}

impl ModelParams {
    /// Uniform fan-in initialization, deterministic per seed. The hidden
    /// bias starts slightly positive so every rectifier unit is live.
    pub fn init(shapes: ModelShapes, seed: u64) -> Self {
        Self::init_scaled(shapes, seed, &vec![1.0; shapes.feat_dim])
    }

    /// Like [`init`](Self::init), with the query projection scaled by the
    /// reciprocal RMS of each token channel. Raw signal values can sit far
    /// from unit scale; absorbing that into the initial query weights keeps
    /// the initial attention logits O(1) instead of saturating the softmax.
    pub fn init_scaled(shapes: ModelShapes, seed: u64, channel_rms: &[f64]) -> Self {
        assert_eq!(channel_rms.len(), shapes.feat_dim, "one rms per channel");
        let mut rng = rng_from_seed(seed);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let scale = 1.0 / (fan_in as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
        };
        let mut w_q = uniform(shapes.feat_dim, shapes.d_att, shapes.feat_dim);
        for (j, rms) in channel_rms.iter().enumerate() {
            let inv = 1.0 / rms.max(1e-9);
            for v in w_q.row_mut(j).iter_mut() {
                *v *= inv;
            }
        }
        let tensors = vec![
            w_q,
            DMatrix::zeros(shapes.d_att, 1),
            uniform(shapes.embed_dim, shapes.d_att, shapes.embed_dim),
            DMatrix::zeros(shapes.d_att, 1),
            uniform(shapes.embed_dim, shapes.d_att, shapes.embed_dim),
            DMatrix::zeros(shapes.d_att, 1),
            uniform(shapes.d_att, shapes.hidden, shapes.d_att),
            DMatrix::from_element(shapes.hidden, 1, 0.1),
            uniform(shapes.hidden, 1, shapes.hidden),
            DMatrix::zeros(1, 1),
        ];
        ModelParams {
            shapes,
            set: ParamSet { tensors },
        }
    }

    pub fn shapes(&self) -> ModelShapes {
        self.shapes
    }

    pub fn param_set(&self) -> &ParamSet {
        &self.set
    }

    pub(crate) fn from_parts(shapes: ModelShapes, tensors: Vec<DMatrix<f64>>) -> Result<Self> {
        let expected = expected_shapes(shapes);
        if tensors.len() != expected.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} tensors, expected {}",
                tensors.len(),
                expected.len()
            )));
        }
        for (i, (t, (r, c))) in tensors.iter().zip(expected).enumerate() {
            if t.nrows() != r || t.ncols() != c {
                return Err(Error::ShapeMismatch(format!(
                    "{}: {}x{}, expected {r}x{c}",
                    PARAM_NAMES[i],
                    t.nrows(),
                    t.ncols()
                )));
            }
        }
        Ok(ModelParams {
            shapes,
            set: ParamSet { tensors },
        })
    }

    /// Applies `f` to one named parameter entry; test and tooling hook.
    pub fn perturb(&mut self, name: &str, row: usize, col: usize, delta: f64) {
        let idx = PARAM_NAMES.iter().position(|&n| n == name).expect("param name");
        self.set.tensors[idx][(row, col)] += delta;
    }
}

fn expected_shapes(shapes: ModelShapes) -> Vec<(usize, usize)> {
    vec![
        (shapes.feat_dim, shapes.d_att),
        (shapes.d_att, 1),
        (shapes.embed_dim, shapes.d_att),
        (shapes.d_att, 1),
        (shapes.embed_dim, shapes.d_att),
        (shapes.d_att, 1),
        (shapes.d_att, shapes.hidden),
        (shapes.hidden, 1),
        (shapes.hidden, 1),
        (1, 1),
    ]
}

/// Per-channel RMS of the token features over a whole set.
fn token_channel_rms(set: &LabeledSet) -> Vec<f64> {
    let dims = set.dims();
    let t_len = set.trajectory_len();
    let mut sums = vec![0.0_f64; dims + 1];
    for tr in set.trajectories() {
        for t in 0..t_len {
            for d in 0..dims {
                sums[d] += tr.value(t, d).powi(2);
            }
            sums[dims] += (t as f64 / t_len as f64).powi(2);
        }
    }
    let count = (set.len() * t_len) as f64;
    sums.into_iter().map(|s| (s / count).sqrt()).collect()
}

/// Trajectory tokens: value channels plus t/T, one row per step.
fn tokens(xi: &Trajectory) -> DMatrix<f64> {
    let t_len = xi.len();
    let dims = xi.dims();
    DMatrix::from_fn(t_len, dims + 1, |t, j| {
        if j < dims {
            xi.value(t, j)
        } else {
            t as f64 / t_len as f64
        }
    })
}

/// Key/value projections of the bank, shared across a batch.
struct BankProjection {
    keys: DMatrix<f64>,
    values: DMatrix<f64>,
}

fn add_row_bias(mut m: DMatrix<f64>, bias: &DMatrix<f64>) -> DMatrix<f64> {
    for mut row in m.row_iter_mut() {
        for (v, b) in row.iter_mut().zip(bias.column(0).iter()) {
            *v += b;
        }
    }
    m
}

fn project_bank(params: &ModelParams, bank: &ConceptBank) -> BankProjection {
    BankProjection {
        keys: add_row_bias(
            bank.embeddings() * &params.set.tensors[W_K],
            &params.set.tensors[B_K],
        ),
        values: add_row_bias(
            bank.embeddings() * &params.set.tensors[W_V],
            &params.set.tensors[B_V],
        ),
    }
}

/// Everything the backward pass needs from a forward evaluation.
struct ForwardTrace {
    x: DMatrix<f64>,
    attention: DMatrix<f64>,
    context: DVector<f64>,
    z1: DVector<f64>,
    hidden: DVector<f64>,
    p: f64,
}

fn validate_input(params: &ModelParams, xi: &Trajectory, bank: &ConceptBank) -> Result<()> {
    if xi.dims() + 1 != params.shapes.feat_dim {
        return Err(Error::ShapeMismatch(format!(
            "trajectory has {} dims, model expects {}",
            xi.dims(),
            params.shapes.feat_dim - 1
        )));
    }
    if bank.embed_dim() != params.shapes.embed_dim {
        return Err(Error::ShapeMismatch(format!(
            "bank embedding dim {} vs model {}",
            bank.embed_dim(),
            params.shapes.embed_dim
        )));
    }
    Ok(())
}

fn forward_trace(
    params: &ModelParams,
    xi: &Trajectory,
    projection: &BankProjection,
) -> ForwardTrace {
    let x = tokens(xi);
    let queries = add_row_bias(&x * &params.set.tensors[W_Q], &params.set.tensors[B_Q]); // T x a
    let scale = 1.0 / (params.shapes.d_att as f64).sqrt();
    let mut scores = &queries * projection.keys.transpose(); // T x C
    scores *= scale;

    // Row softmax, max-shifted.
    let mut attention = scores;
    for mut row in attention.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }

    let t_len = x.nrows();
    let pooled = &attention * &projection.values; // T x a
    let context = DVector::from_fn(params.shapes.d_att, |j, _| {
        pooled.column(j).sum() / t_len as f64
    });

    let z1 = params.set.tensors[W1].transpose() * &context + params.set.tensors[B1].column(0);
    let hidden = z1.map(|v| v.max(0.0));
    let logit = (params.set.tensors[W2].column(0).transpose() * &hidden)[(0, 0)]
        + params.set.tensors[B2][(0, 0)];
    let p = 1.0 / (1.0 + (-logit).exp());

    ForwardTrace {
        x,
        attention,
        context,
        z1,
        hidden,
        p,
    }
}

fn attention_record(attention: &DMatrix<f64>) -> AttentionRecord {
    let t_len = attention.nrows() as f64;
    AttentionRecord(
        (0..attention.ncols())
            .map(|c| attention.column(c).sum() / t_len)
            .collect(),
    )
}

/// Forward pass: anomaly probability and pooled attention over concepts.
pub fn forward(
    params: &ModelParams,
    xi: &Trajectory,
    bank: &ConceptBank,
) -> Result<(f64, AttentionRecord)> {
    validate_input(params, xi, bank)?;
    let projection = project_bank(params, bank);
    let trace = forward_trace(params, xi, &projection);
    Ok((trace.p, attention_record(&trace.attention)))
}

/// Binary cross entropy with the probability clamped away from 0 and 1.
pub fn loss_bce(p: f64, y: u8) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    let y = f64::from(y);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Mean-BCE gradients over a batch, with the per-sample losses.
pub fn backward(
    params: &ModelParams,
    batch: &[(&Trajectory, u8)],
    bank: &ConceptBank,
) -> Result<(ParamSet, f64)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    for (xi, _) in batch {
        validate_input(params, xi, bank)?;
    }
    let projection = project_bank(params, bank);

    // Per-sample gradients in parallel, reduced in batch order so the sum is
    // deterministic.
    let per_sample: Vec<(ParamSet, f64)> = batch
        .par_iter()
        .map(|&(xi, y)| {
            let trace = forward_trace(params, xi, &projection);
            let mut grad = ParamSet::zeros_like(&params.set);
            backward_sample(params, &projection, bank.embeddings(), &trace, y, &mut grad);
            (grad, loss_bce(trace.p, y))
        })
        .collect();

    let mut total = ParamSet::zeros_like(&params.set);
    let mut loss_sum = 0.0;
    for (grad, loss) in &per_sample {
        total.add_assign(grad);
        loss_sum += loss;
    }
    total.scale(1.0 / batch.len() as f64);

    if let Some(name) = total.first_non_finite() {
        return Err(Error::NonFiniteGradient(name));
    }
    Ok((total, loss_sum / batch.len() as f64))
}

/// Gradient of one sample's loss, accumulated into `grad`.
fn backward_sample(
    params: &ModelParams,
    projection: &BankProjection,
    embeddings: &DMatrix<f64>,
    trace: &ForwardTrace,
    y: u8,
    grad: &mut ParamSet,
) {
    let shapes = params.shapes;
    let t_len = trace.x.nrows();
    // d loss / d logit of sigmoid-BCE; finite even when the loss clamps p.
    let g = trace.p - f64::from(y);

    // MLP head.
    for j in 0..shapes.hidden {
        grad.tensors[W2][(j, 0)] += g * trace.hidden[j];
    }
    grad.tensors[B2][(0, 0)] += g;
    let mut dz1 = DVector::zeros(shapes.hidden);
    for j in 0..shapes.hidden {
        if trace.z1[j] > 0.0 {
            dz1[j] = g * params.set.tensors[W2][(j, 0)];
        }
    }
    for a in 0..shapes.d_att {
        for j in 0..shapes.hidden {
            grad.tensors[W1][(a, j)] += trace.context[a] * dz1[j];
        }
    }
    for j in 0..shapes.hidden {
        grad.tensors[B1][(j, 0)] += dz1[j];
    }
    let dcontext = &params.set.tensors[W1] * &dz1;

    // Mean pooling spreads the context gradient uniformly over rows, so the
    // gradient through pooled = A V collapses:
    //   dA[t,:] = (V drow)^T for every t ; dV = colsum(A) drow^T.
    let drow = &dcontext / t_len as f64;
    let dattn_row = &projection.values * &drow;
    let col_sums = DVector::<f64>::from_fn(trace.attention.ncols(), |c, _| {
        trace.attention.column(c).sum()
    });
    let dvalues = &col_sums * drow.transpose();

    // Softmax backward per row: dS = A o (dA - <A, dA>), then the 1/sqrt(a)
    // score scaling.
    let scale = 1.0 / (shapes.d_att as f64).sqrt();
    let mut dscores = DMatrix::zeros(t_len, trace.attention.ncols());
    for t in 0..t_len {
        let row = trace.attention.row(t);
        let inner: f64 = row.iter().zip(dattn_row.iter()).map(|(a, d)| a * d).sum();
        for c in 0..trace.attention.ncols() {
            dscores[(t, c)] = row[c] * (dattn_row[c] - inner) * scale;
        }
    }

    // Scores = Q K^T: dQ = dS K ; dK = dS^T Q.
    let queries = add_row_bias(
        &trace.x * &params.set.tensors[W_Q],
        &params.set.tensors[B_Q],
    );
    let dqueries = &dscores * &projection.keys;
    let dkeys = dscores.transpose() * &queries;

    grad.tensors[W_Q] += trace.x.transpose() * &dqueries;
    grad.tensors[W_K] += embeddings.transpose() * &dkeys;
    grad.tensors[W_V] += embeddings.transpose() * &dvalues;
    for j in 0..shapes.d_att {
        grad.tensors[B_Q][(j, 0)] += dqueries.column(j).sum();
        grad.tensors[B_K][(j, 0)] += dkeys.column(j).sum();
        grad.tensors[B_V][(j, 0)] += dvalues.column(j).sum();
    }
}

/// Gradient update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    /// Adaptive moment estimation.
    Adam { beta1: f64, beta2: f64, eps: f64 },
    /// Plain stochastic gradient descent.
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Initialization seeds for repeated runs; metrics report mean and std
    /// over these.
    pub seeds: Vec<u64>,
    /// Train share of a stratified split.
    pub train_frac: f64,
    pub d_att: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 1e-5,
            batch_size: 32,
            optimizer: OptimizerKind::default(),
            seeds: vec![0, 1, 2, 3, 4],
            train_frac: 0.7,
            d_att: 32,
            hidden: 64,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParams("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParams(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.d_att == 0 || self.hidden == 0 {
            return Err(Error::InvalidParams(
                "batch_size, d_att and hidden must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Per-epoch training log.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.accuracy));
        }
        out
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.accuracy)
    }
}

struct AdamState {
    m: ParamSet,
    v: ParamSet,
    step: usize,
}

fn apply_update(
    params: &mut ModelParams,
    grads: &ParamSet,
    optimizer: OptimizerKind,
    lr: f64,
    adam: &mut Option<AdamState>,
) {
    match optimizer {
        OptimizerKind::Sgd => {
            for (p, g) in params.set.tensors.iter_mut().zip(&grads.tensors) {
                for (pv, gv) in p.iter_mut().zip(g.iter()) {
                    *pv -= lr * gv;
                }
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            let state = adam.get_or_insert_with(|| AdamState {
                m: ParamSet::zeros_like(&params.set),
                v: ParamSet::zeros_like(&params.set),
                step: 0,
            });
            state.step += 1;
            let t = state.step as i32;
            let bias1 = 1.0 - beta1.powi(t);
            let bias2 = 1.0 - beta2.powi(t);
            for i in 0..params.set.tensors.len() {
                let p = &mut params.set.tensors[i];
                let g = &grads.tensors[i];
                let m = &mut state.m.tensors[i];
                let v = &mut state.v.tensors[i];
                for ((pv, gv), (mv, vv)) in p
                    .iter_mut()
                    .zip(g.iter())
                    .zip(m.iter_mut().zip(v.iter_mut()))
                {
                    *mv = beta1 * *mv + (1.0 - beta1) * gv;
                    *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                    let m_hat = *mv / bias1;
                    let v_hat = *vv / bias2;
                    *pv -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

/// Trains one model with the given initialization seed.
///
/// Deterministic: identical (set, bank, config, seed) reproduce identical
/// weights and history.
pub fn train(
    set: &LabeledSet,
    bank: &ConceptBank,
    config: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, TrainHistory)> {
    use rand::seq::SliceRandom;

    config.validate()?;
    let classes: std::collections::BTreeSet<u8> = set.labels().iter().copied().collect();
    if classes.len() < 2 {
        log::warn!("training set contains a single class; the model will learn a constant");
    }

    let shapes = ModelShapes {
        feat_dim: set.dims() + 1,
        embed_dim: bank.embed_dim(),
        d_att: config.d_att,
        hidden: config.hidden,
    };
    let mut params = ModelParams::init_scaled(
        shapes,
        substream(seed, "train-init"),
        &token_channel_rms(set),
    );
    let mut shuffle_rng = rng_from_seed(substream(seed, "train-shuffle"));
    let mut adam: Option<AdamState> = None;
    let mut history = TrainHistory::default();

    let n = set.len();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&Trajectory, u8)> = chunk
                .iter()
                .map(|&i| (&set.trajectories()[i], set.labels()[i]))
                .collect();
            let (grads, batch_loss) = backward(&params, &batch, bank)?;
            apply_update(
                &mut params,
                &grads,
                config.optimizer,
                config.learning_rate,
                &mut adam,
            );
            loss_sum += batch_loss * chunk.len() as f64;
        }
        let predictions = predict(&params, set, bank)?;
        history.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: accuracy(&predictions.labels, set.labels()),
        });
    }

    Ok((params, history))
}

/// Batch predictions with retained attention records.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub probabilities: Vec<f64>,
    /// 1 iff p >= 0.5 (ties predict anomalous).
    pub labels: Vec<u8>,
    pub attentions: Vec<AttentionRecord>,
}

pub fn predict(params: &ModelParams, set: &LabeledSet, bank: &ConceptBank) -> Result<Predictions> {
    for tr in set.trajectories() {
        validate_input(params, tr, bank)?;
    }
    let projection = project_bank(params, bank);
    let results: Vec<(f64, AttentionRecord)> = set
        .trajectories()
        .par_iter()
        .map(|xi| {
            let trace = forward_trace(params, xi, &projection);
            (trace.p, attention_record(&trace.attention))
        })
        .collect();

    let probabilities: Vec<f64> = results.iter().map(|(p, _)| *p).collect();
    let labels: Vec<u8> = probabilities.iter().map(|&p| u8::from(p >= 0.5)).collect();
    let attentions: Vec<AttentionRecord> = results.into_iter().map(|(_, a)| a).collect();
    Ok(Predictions {
        probabilities,
        labels,
        attentions,
    })
}

/// Fraction of matching labels.
pub fn accuracy(predicted: &[u8], actual: &[u8]) -> f64 {
    debug_assert_eq!(predicted.len(), actual.len());
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted
        .iter()
        .zip(actual)
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / predicted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{parse, Formula};
    use crate::trajectory::Mu0Params;

    fn synthetic_bank(n_concepts: usize, embed_dim: usize, seed: u64) -> ConceptBank {
        let mut rng = rng_from_seed(seed);
        let formulas: Vec<Formula> = (0..n_concepts)
            .map(|i| parse(&format!("x_0 >= {}", i as f64 * 0.5)).unwrap())
            .collect();
        let embeddings =
            DMatrix::from_fn(n_concepts, embed_dim, |_, _| rng.gen_range(-1.0..1.0));
        ConceptBank::from_parts(formulas, embeddings, Mu0Params::default(), seed).unwrap()
    }

    fn ramp_trajectory(t_len: usize, dims: usize, seed: u64) -> Trajectory {
        let mut rng = rng_from_seed(seed);
        let values = (0..t_len)
            .map(|t| {
                (0..dims)
                    .map(|d| t as f64 * 0.1 + d as f64 + rng.gen_range(-0.5..0.5))
                    .collect()
            })
            .collect();
        Trajectory::new(values, 1.0, 0.0).unwrap()
    }

    fn small_shapes(dims: usize, embed_dim: usize) -> ModelShapes {
        ModelShapes {
            feat_dim: dims + 1,
            embed_dim,
            d_att: 4,
            hidden: 8,
        }
    }

    #[test]
    fn attention_sums_to_one() {
        let bank = synthetic_bank(5, 4, 1);
        let params = ModelParams::init(small_shapes(1, 4), 2);
        let xi = ramp_trajectory(10, 1, 3);
        let (p, att) = forward(&params, &xi, &bank).unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!(att.weights().iter().all(|&w| w >= 0.0));
        let sum: f64 = att.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_concept_gets_all_attention() {
        let bank = synthetic_bank(1, 4, 1);
        let params = ModelParams::init(small_shapes(1, 4), 2);
        let xi = ramp_trajectory(10, 1, 3);
        let (_, att) = forward(&params, &xi, &bank).unwrap();
        assert_eq!(att.weights(), &[1.0]);
    }

    #[test]
    fn zeroed_projections_give_uniform_attention() {
        let bank = synthetic_bank(8, 4, 1);
        let mut params = ModelParams::init(small_shapes(1, 4), 2);
        params.set.tensors[W_Q].fill(0.0);
        params.set.tensors[W_K].fill(0.0);
        let xi = ramp_trajectory(10, 1, 3);
        let (_, att) = forward(&params, &xi, &bank).unwrap();
        for &w in att.weights() {
            assert!((w - 1.0 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_loss_values() {
        assert!(loss_bce(1.0, 1) < 1e-10);
        assert!(loss_bce(0.0, 0) < 1e-10);
        assert!((loss_bce(0.5, 0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss_bce(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-12);
        // clamped: finite even at impossible probabilities
        assert!(loss_bce(0.0, 1).is_finite());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let bank = synthetic_bank(5, 4, 1);
        let params = ModelParams::init(small_shapes(2, 4), 2);
        let xi = ramp_trajectory(10, 1, 3);
        assert!(matches!(
            forward(&params, &xi, &bank),
            Err(Error::ShapeMismatch(_))
        ));
    }

    /// Central finite differences of the mean batch loss.
    fn numeric_grad(
        params: &ModelParams,
        batch: &[(&Trajectory, u8)],
        bank: &ConceptBank,
        name: &str,
        row: usize,
        col: usize,
    ) -> f64 {
        let h = 1e-5;
        let mut plus = params.clone();
        plus.perturb(name, row, col, h);
        let mut minus = params.clone();
        minus.perturb(name, row, col, -h);
        let loss = |p: &ModelParams| -> f64 {
            let projection = project_bank(p, bank);
            batch
                .iter()
                .map(|&(xi, y)| loss_bce(forward_trace(p, xi, &projection).p, y))
                .sum::<f64>()
                / batch.len() as f64
        };
        (loss(&plus) - loss(&minus)) / (2.0 * h)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        // T=10, C=5, d=4, h=8 per the gradient-check configuration.
        let bank = synthetic_bank(5, 4, 11);
        let params = ModelParams::init(small_shapes(1, 4), 12);
        let trajectories: Vec<Trajectory> =
            (0..4).map(|i| ramp_trajectory(10, 1, 20 + i)).collect();
        let batch: Vec<(&Trajectory, u8)> = trajectories
            .iter()
            .enumerate()
            .map(|(i, tr)| (tr, (i % 2) as u8))
            .collect();

        let (grads, _) = backward(&params, &batch, &bank).unwrap();
        for (name, tensor) in grads.named() {
            for row in 0..tensor.nrows() {
                for col in 0..tensor.ncols() {
                    let analytic = tensor[(row, col)];
                    let numeric = numeric_grad(&params, &batch, &bank, name, row, col);
                    let denom = analytic.abs().max(numeric.abs()).max(1e-3);
                    assert!(
                        (analytic - numeric).abs() / denom <= 1e-4,
                        "{name}[{row},{col}]: analytic {analytic} vs numeric {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn zeroed_output_layer_blocks_value_gradient() {
        // With w2 = 0 and b1 = 0 the prediction is sigma(b2) and nothing
        // upstream of the head receives gradient.
        let bank = synthetic_bank(5, 4, 13);
        let mut params = ModelParams::init(small_shapes(1, 4), 14);
        params.set.tensors[W2].fill(0.0);
        let xi = ramp_trajectory(10, 1, 15);
        let batch = vec![(&xi, 1u8)];
        let (grads, _) = backward(&params, &batch, &bank).unwrap();
        assert!(grads.tensors[W_V].iter().all(|&g| g == 0.0));
        assert!(grads.tensors[W_Q].iter().all(|&g| g == 0.0));
        assert!(grads.tensors[B2].iter().all(|&g| g != 0.0));
    }

    #[test]
    fn saturated_sample_has_finite_gradient() {
        let bank = synthetic_bank(5, 4, 16);
        let mut params = ModelParams::init(small_shapes(1, 4), 17);
        // Huge output bias saturates the sigmoid; loss clamps, grads stay finite.
        params.set.tensors[B2][(0, 0)] = 60.0;
        let xi = ramp_trajectory(10, 1, 18);
        let batch = vec![(&xi, 0u8)];
        let (grads, loss) = backward(&params, &batch, &bank).unwrap();
        assert!(loss.is_finite());
        assert!(grads.first_non_finite().is_none());
    }

    #[test]
    fn permuting_concepts_permutes_attention_and_keeps_p() {
        let bank = synthetic_bank(6, 4, 19);
        let params = ModelParams::init(small_shapes(1, 4), 20);
        let xi = ramp_trajectory(12, 1, 21);
        let (p, att) = forward(&params, &xi, &bank).unwrap();

        let perm = [3usize, 0, 5, 1, 4, 2];
        let permuted_formulas: Vec<Formula> =
            perm.iter().map(|&i| bank.formulas()[i].clone()).collect();
        let permuted_emb = DMatrix::from_fn(6, 4, |r, c| bank.embeddings()[(perm[r], c)]);
        let permuted =
            ConceptBank::from_parts(permuted_formulas, permuted_emb, Mu0Params::default(), 0)
                .unwrap();
        let (p2, att2) = forward(&params, &xi, &permuted).unwrap();

        assert!((p - p2).abs() < 1e-9);
        for (new_idx, &old_idx) in perm.iter().enumerate() {
            assert!((att2.weights()[new_idx] - att.weights()[old_idx]).abs() < 1e-9);
        }
    }

    fn tiny_training_set(n: usize) -> LabeledSet {
        // Class 1 ramps up, class 0 ramps down: separable from the tokens.
        let trajectories: Vec<Trajectory> = (0..n)
            .map(|i| {
                let up = i % 2 == 1;
                let values = (0..12)
                    .map(|t| {
                        let v = if up { t as f64 } else { 11.0 - t as f64 };
                        vec![v * 0.2 + (i as f64) * 0.01]
                    })
                    .collect();
                Trajectory::new(values, 1.0, 0.0).unwrap()
            })
            .collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        LabeledSet::new(trajectories, labels).unwrap()
    }

    #[test]
    fn overfits_a_tiny_set_with_nonincreasing_loss() {
        let bank = synthetic_bank(6, 4, 22);
        let set = tiny_training_set(8);
        let config = TrainConfig {
            epochs: 120,
            learning_rate: 5e-3,
            batch_size: 8,
            d_att: 4,
            hidden: 8,
            ..TrainConfig::default()
        };
        let (_, history) = train(&set, &bank, &config, 1).unwrap();
        let first = history.epochs.first().unwrap().loss;
        let last = history.epochs.last().unwrap().loss;
        assert!(last < first, "loss did not decrease: {first} -> {last}");
        // Loss is non-increasing within tolerance across epochs.
        for w in history.epochs.windows(2) {
            assert!(
                w[1].loss <= w[0].loss + 0.05,
                "epoch {}: loss jumped {} -> {}",
                w[1].epoch,
                w[0].loss,
                w[1].loss
            );
        }
        assert!(history.final_accuracy().unwrap() >= 0.95);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let bank = synthetic_bank(6, 4, 23);
        let set = tiny_training_set(8);
        let config = TrainConfig {
            epochs: 5,
            learning_rate: 1e-3,
            batch_size: 4,
            d_att: 4,
            hidden: 8,
            ..TrainConfig::default()
        };
        let (params_a, history_a) = train(&set, &bank, &config, 7).unwrap();
        let (params_b, history_b) = train(&set, &bank, &config, 7).unwrap();
        assert_eq!(params_a, params_b);
        assert_eq!(history_a, history_b);
        let (params_c, _) = train(&set, &bank, &config, 8).unwrap();
        assert_ne!(params_a, params_c);
    }

    #[test]
    fn predict_is_pure_and_ties_go_to_anomalous() {
        let bank = synthetic_bank(6, 4, 24);
        let set = tiny_training_set(6);
        let params = ModelParams::init(small_shapes(1, 4), 25);
        let a = predict(&params, &set, &bank).unwrap();
        let b = predict(&params, &set, &bank).unwrap();
        assert_eq!(a.probabilities, b.probabilities);
        assert_eq!(a.labels, b.labels);
        for (&p, &l) in a.probabilities.iter().zip(&a.labels) {
            assert_eq!(l, u8::from(p >= 0.5));
        }
    }

    #[test]
    fn accuracy_matches_hand_count() {
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 0, 0, 1]), 0.75);
        assert_eq!(accuracy(&[0, 0], &[1, 1]), 0.0);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let params = ModelParams::init(small_shapes(1, 4), 31);
        let meta = CheckpointMeta {
            shapes: params.shapes(),
            train_config: TrainConfig::default(),
            seed: 31,
            bank_hash: "abc123".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &params, &meta).unwrap();
        let (loaded, loaded_meta) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(loaded, params);
        assert_eq!(loaded_meta, meta);
    }
}
