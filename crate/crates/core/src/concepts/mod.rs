//! Concept-bank construction.
//!
//! Pipeline: enumerate small formula templates, instantiate them on
//! data-derived parameter grids, deduplicate each template's instantiations
//! by signature distance, embed the pooled survivors by kernel PCA, and pick
//! a semantically spread subset by Latin hypercube sampling in embedding
//! space. The resulting bank is immutable and fully reproducible from its
//! recorded provenance.

mod filter;
mod grid;
mod lhs;
mod templates;

pub use filter::{signature_filter, signature_filter_indices, signature_matrix};
pub use grid::{instantiate, instantiate_with_params, ParameterGrid, THRESHOLD_QUANTILES};
pub use lhs::{embedding_bounds, lhs_points, lhs_select};
pub use templates::{enumerate_templates, Template};

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::{gram_from_vectors, kpca_fit, SignatureBasis, StlKernel, DEFAULT_BASIS_SIZE, DEFAULT_CLAMP};
use crate::rng::substream;
use crate::stl::{robustness_at_zero, Formula, Interval};
use crate::trajectory::{LabeledSet, Mu0Params};

/// Default number of concepts kept in the bank.
pub const DEFAULT_BANK_SIZE: usize = 256;

/// Default signature cosine-distance threshold.
pub const DEFAULT_TAU: f64 = 0.9;

/// Default maximum template size in nodes.
pub const DEFAULT_MAX_NODES: usize = 3;

/// Default embedding dimension.
pub const DEFAULT_EMBED_DIM: usize = 16;

/// Signature cosine similarity above which two pooled concepts count as
/// the same concept.
pub const DUPLICATE_SIMILARITY: f64 = 1.0 - 1e-9;

/// Configuration of a bank build.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BankConfig {
    pub max_nodes: usize,
    pub n_vars: usize,
    pub tau: f64,
    pub bank_size: usize,
    pub basis_size: usize,
    pub embed_dim: usize,
    pub clamp: f64,
    pub mu0: Mu0Params,
    pub seed: u64,
}

impl BankConfig {
    pub fn new(n_vars: usize) -> Self {
        BankConfig {
            max_nodes: DEFAULT_MAX_NODES,
            n_vars,
            tau: DEFAULT_TAU,
            bank_size: DEFAULT_BANK_SIZE,
            basis_size: DEFAULT_BASIS_SIZE,
            embed_dim: DEFAULT_EMBED_DIM,
            clamp: DEFAULT_CLAMP,
            mu0: Mu0Params {
                n_dims: n_vars,
                ..Mu0Params::default()
            },
            seed: 0,
        }
    }

    /// Defaults with the trajectory measure rescaled to a dataset: the basis
    /// shares the data's length and dimension, starts where the data starts,
    /// and has a comparable total variation, so concept thresholds land in
    /// the data's value range.
    pub fn for_dataset(set: &LabeledSet, seed: u64) -> Self {
        let dims = set.dims();
        let starts: Vec<f64> = set
            .trajectories()
            .iter()
            .flat_map(|tr| tr.step(0).to_vec())
            .collect();
        let start_mean = starts.iter().sum::<f64>() / starts.len() as f64;
        let start_var = starts
            .iter()
            .map(|v| (v - start_mean).powi(2))
            .sum::<f64>()
            / starts.len() as f64;
        let mean_tv = set
            .trajectories()
            .iter()
            .flat_map(|tr| (0..dims).map(move |d| tr.total_variation(d)))
            .sum::<f64>()
            / (set.len() * dims) as f64;

        let mu0 = Mu0Params::for_data_scale(
            set.trajectory_len(),
            dims,
            start_mean,
            start_var.sqrt(),
            mean_tv,
        );
        BankConfig {
            seed,
            mu0,
            ..BankConfig::new(dims)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 || self.n_vars == 0 || self.bank_size == 0 || self.embed_dim == 0 {
            return Err(Error::InvalidParams(
                "max_nodes, n_vars, bank_size and embed_dim must be >= 1".into(),
            ));
        }
        if self.tau < 0.0 {
            return Err(Error::InvalidParams(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.mu0.n_dims != self.n_vars {
            return Err(Error::InvalidParams(format!(
                "mu0 dimensionality {} does not match n_vars {}",
                self.mu0.n_dims, self.n_vars
            )));
        }
        self.mu0.validate()
    }
}

/// Where a bank concept came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptProvenance {
    pub template_index: usize,
    pub template_id: String,
    pub thresholds: Vec<f64>,
    pub intervals: Vec<Interval>,
}

/// Reproducibility metadata stored next to the bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankMeta {
    pub seed: u64,
    pub basis_seed: u64,
    pub lhs_seed: u64,
    pub basis_size: usize,
    pub clamp: f64,
    pub mu0: Mu0Params,
    pub tau: f64,
    pub max_nodes: usize,
    pub n_vars: usize,
    pub embed_dim: usize,
    pub bank_size: usize,
    /// Concepts surviving the signature filter, before selection.
    pub pool_size: usize,
    /// Grid instantiations across all templates.
    pub candidate_count: usize,
    pub threshold_grids: Vec<Vec<f64>>,
    pub interval_grid: Vec<Interval>,
    /// Retained kernel-PCA eigenvalues, non-increasing.
    pub kpca_eigenvalues: Vec<f64>,
}

/// A fixed set of concept formulae with their kernel-PCA embeddings.
#[derive(Debug, Clone)]
pub struct ConceptBank {
    formulas: Vec<Formula>,
    embeddings: DMatrix<f64>,
    provenance: Vec<ConceptProvenance>,
    meta: BankMeta,
}

impl ConceptBank {
    /// Assembles a bank from existing formulae and embedding rows, e.g. for
    /// tools and tests. Provenance is marked external.
    pub fn from_parts(
        formulas: Vec<Formula>,
        embeddings: DMatrix<f64>,
        mu0: Mu0Params,
        seed: u64,
    ) -> Result<Self> {
        if formulas.is_empty() {
            return Err(Error::EmptyInput("empty concept bank".into()));
        }
        if embeddings.nrows() != formulas.len() || embeddings.ncols() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} embedding rows for {} formulas",
                embeddings.nrows(),
                formulas.len()
            )));
        }
        let provenance = formulas
            .iter()
            .map(|_| ConceptProvenance {
                template_index: 0,
                template_id: "external".into(),
                thresholds: Vec::new(),
                intervals: Vec::new(),
            })
            .collect();
        let max_nodes = formulas.iter().map(|f| f.node_count()).max().unwrap_or(1);
        let n_vars = formulas
            .iter()
            .filter_map(|f| f.max_var_index())
            .max()
            .map_or(1, |v| v + 1);
        let meta = BankMeta {
            seed,
            basis_seed: seed,
            lhs_seed: seed,
            basis_size: 0,
            clamp: DEFAULT_CLAMP,
            mu0,
            tau: DEFAULT_TAU,
            max_nodes,
            n_vars,
            embed_dim: embeddings.ncols(),
            bank_size: formulas.len(),
            pool_size: formulas.len(),
            candidate_count: formulas.len(),
            threshold_grids: Vec::new(),
            interval_grid: Vec::new(),
            kpca_eigenvalues: Vec::new(),
        };
        Ok(ConceptBank {
            formulas,
            embeddings,
            provenance,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }

    pub fn embed_dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn formula(&self, i: usize) -> &Formula {
        &self.formulas[i]
    }

    /// C x d embedding matrix, rows aligned with `formulas`.
    pub fn embeddings(&self) -> &DMatrix<f64> {
        &self.embeddings
    }

    pub fn embedding_row(&self, i: usize) -> Vec<f64> {
        self.embeddings.row(i).iter().copied().collect()
    }

    pub fn provenance(&self) -> &[ConceptProvenance] {
        &self.provenance
    }

    pub fn meta(&self) -> &BankMeta {
        &self.meta
    }

    /// Robustness of every concept on a trajectory at time 0.
    pub fn robustness_on(&self, xi: &crate::trajectory::Trajectory) -> Result<Vec<f64>> {
        self.formulas
            .par_iter()
            .map(|phi| robustness_at_zero(phi, xi))
            .collect()
    }

    fn formulas_text(&self) -> String {
        let mut out = String::new();
        for phi in &self.formulas {
            out.push_str(&phi.render());
            out.push('\n');
        }
        out
    }

    fn embeddings_csv(&self) -> String {
        let d = self.embed_dim();
        let mut out = String::new();
        let header: Vec<String> = (0..d).map(|l| format!("dim_{l}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.len() {
            let row: Vec<String> = (0..d).map(|l| format!("{}", self.embeddings[(i, l)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Content hash over the formula list and embedding matrix, hex-encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.formulas_text().as_bytes());
        hasher.update(b"--\n");
        hasher.update(self.embeddings_csv().as_bytes());
        hex_string(&hasher.finalize())
    }

    /// Writes `formulas.txt`, `embeddings.csv` and `bank.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, contents: String| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
        };
        write("formulas.txt", self.formulas_text())?;
        write("embeddings.csv", self.embeddings_csv())?;
        let sidecar = BankFile {
            meta: self.meta.clone(),
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("serializable bank sidecar");
        write("bank.json", json + "\n")
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        };

        let formulas: Vec<Formula> = read("formulas.txt")?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(Formula::parse)
            .collect::<Result<_>>()?;

        let emb_text = read("embeddings.csv")?;
        let mut lines = emb_text.lines();
        let header = lines.next().ok_or_else(|| Error::MalformedFile {
            path: dir.join("embeddings.csv").display().to_string(),
            message: "empty embedding file".into(),
        })?;
        let d = header.split(',').count();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MalformedFile {
                    path: dir.join("embeddings.csv").display().to_string(),
                    message: format!("row {}: {e}", i + 2),
                })?;
            if row.len() != d {
                return Err(Error::MalformedFile {
                    path: dir.join("embeddings.csv").display().to_string(),
                    message: format!("row {} has {} columns, expected {d}", i + 2, row.len()),
                });
            }
            rows.push(row);
        }

        let sidecar: BankFile =
            serde_json::from_str(&read("bank.json")?).map_err(|e| Error::MalformedFile {
                path: dir.join("bank.json").display().to_string(),
                message: e.to_string(),
            })?;

        if rows.len() != formulas.len() || sidecar.provenance.len() != formulas.len() {
            return Err(Error::MalformedFile {
                path: dir.display().to_string(),
                message: format!(
                    "inconsistent bank: {} formulas, {} embedding rows, {} provenance entries",
                    formulas.len(),
                    rows.len(),
                    sidecar.provenance.len()
                ),
            });
        }

        let embeddings = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Ok(ConceptBank {
            formulas,
            embeddings,
            provenance: sidecar.provenance,
            meta: sidecar.meta,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BankFile {
    meta: BankMeta,
    provenance: Vec<ConceptProvenance>,
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds a concept bank from scratch.
pub fn build_concept_bank(config: &BankConfig) -> Result<ConceptBank> {
    config.validate()?;
    let basis_seed = substream(config.seed, "bank-basis");
    let lhs_seed = substream(config.seed, "bank-lhs");

    let basis = SignatureBasis::sample(&config.mu0, config.basis_size, basis_seed)?;
    let kernel = StlKernel::new(basis, config.clamp)?;
    let grid = ParameterGrid::from_probes(kernel.basis().trajectories())?;
    let templates = enumerate_templates(config.max_nodes, config.n_vars);

    let mut pool_formulas: Vec<Formula> = Vec::new();
    let mut pool_provenance: Vec<ConceptProvenance> = Vec::new();
    let mut candidate_count = 0usize;

    // Signature deduplication runs within each template first.
    for (template_index, template) in templates.iter().enumerate() {
        let instantiations = instantiate_with_params(template, &grid)?;
        candidate_count += instantiations.len();
        let candidates: Vec<Formula> =
            instantiations.iter().map(|(phi, _, _)| phi.clone()).collect();
        let kept = signature_filter_indices(
            &candidates,
            kernel.basis().trajectories(),
            config.tau,
            config.clamp,
        )?;
        for idx in kept {
            let (phi, thresholds, intervals) = instantiations[idx].clone();
            pool_formulas.push(phi);
            pool_provenance.push(ConceptProvenance {
                template_index,
                template_id: template.id(),
                thresholds,
                intervals,
            });
        }
    }

    // A dedup pass across the pooled survivors: different templates can
    // produce semantically identical concepts (a negated <= atom and the
    // matching >= atom have bitwise-equal signatures). The tau rule itself
    // stays per template; across templates only coincident signatures go.
    let kept = signature_filter_indices(
        &pool_formulas,
        kernel.basis().trajectories(),
        DUPLICATE_SIMILARITY,
        config.clamp,
    )?;
    let pool_formulas: Vec<Formula> = kept.iter().map(|&i| pool_formulas[i].clone()).collect();
    let pool_provenance: Vec<ConceptProvenance> =
        kept.iter().map(|&i| pool_provenance[i].clone()).collect();

    if pool_formulas.len() < config.bank_size {
        return Err(Error::SelectionTooLarge {
            m: config.bank_size,
            pool: pool_formulas.len(),
        });
    }

    let vectors = kernel.robustness_vectors(&pool_formulas)?;
    let gram = gram_from_vectors(&vectors, true)?;
    let kpca = kpca_fit(&gram, vectors, config.embed_dim)?;

    let selected = lhs_select(kpca.embeddings(), config.bank_size, lhs_seed)?;

    let embeddings = DMatrix::from_fn(selected.len(), config.embed_dim, |i, l| {
        kpca.embeddings()[(selected[i], l)]
    });
    let formulas: Vec<Formula> = selected.iter().map(|&i| pool_formulas[i].clone()).collect();
    let provenance: Vec<ConceptProvenance> =
        selected.iter().map(|&i| pool_provenance[i].clone()).collect();

    let meta = BankMeta {
        seed: config.seed,
        basis_seed,
        lhs_seed,
        basis_size: config.basis_size,
        clamp: config.clamp,
        mu0: config.mu0.clone(),
        tau: config.tau,
        max_nodes: config.max_nodes,
        n_vars: config.n_vars,
        embed_dim: config.embed_dim,
        bank_size: config.bank_size,
        pool_size: pool_formulas.len(),
        candidate_count,
        threshold_grids: grid.thresholds_per_var().to_vec(),
        interval_grid: grid.intervals().to_vec(),
        kpca_eigenvalues: kpca.eigenvalues().to_vec(),
    };

    Ok(ConceptBank {
        formulas,
        embeddings,
        provenance,
        meta,
    })
}
