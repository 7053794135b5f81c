//! Signal Temporal Logic (STL) concepts for explainable time-series anomaly
//! detection.
//!
//! The crate covers the full pipeline:
//!
//! * [`stl`] — the STL formula language: parsing, rendering, Boolean and
//!   quantitative (robustness) semantics, and structural transforms.
//! * [`trajectory`] — uniformly sampled multivariate signals, the piecewise
//!   linear trajectory sampler used as a base measure, and CSV ingestion.
//! * [`kernel`] — a Monte-Carlo kernel between formulae built from their
//!   robustness profiles, Gram matrices, and kernel-PCA embeddings.
//! * [`concepts`] — unsupervised construction of a bank of small, semantically
//!   diverse STL formulae ("concepts").
//! * [`classifier`] — a cross-attention binary classifier that attends from
//!   trajectory tokens to concept embeddings, trained with analytic gradients.
//! * [`explain`] — local and global explanations extracted from attention
//!   records, with threshold-shift post-processing for readability.
//! * [`datasets`] — synthetic benchmark generators for a cruise-control and a
//!   maritime-surveillance scenario.

pub mod classifier;
pub mod concepts;
pub mod datasets;
pub mod error;
pub mod explain;
pub mod kernel;
pub mod rng;
pub mod stl;
pub mod trajectory;

pub use error::{Error, Result};
