//! Checkpoint persistence: a flat CSV weight dump plus a JSON metadata
//! sidecar (shapes, training config, bank hash, seed).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{expected_shapes, ModelParams, ModelShapes, TrainConfig, PARAM_NAMES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub shapes: ModelShapes,
    pub train_config: TrainConfig,
    pub seed: u64,
    /// Content hash of the concept bank the model was trained against.
    pub bank_hash: String,
}

pub fn save_checkpoint(
    dir: impl AsRef<Path>,
    params: &ModelParams,
    meta: &CheckpointMeta,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut weights = String::from("param,row,col,value\n");
    for (name, tensor) in params.param_set().named() {
        for row in 0..tensor.nrows() {
            for col in 0..tensor.ncols() {
                weights.push_str(&format!("{name},{row},{col},{}\n", tensor[(row, col)]));
            }
        }
    }
    let weights_path = dir.join("weights.csv");
    std::fs::write(&weights_path, weights).map_err(|e| Error::io(&weights_path, e))?;

    let meta_path = dir.join("model.json");
    let json = serde_json::to_string_pretty(meta).expect("serializable checkpoint meta");
    std::fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(ModelParams, CheckpointMeta)> {
    let dir = dir.as_ref();
    let meta_path = dir.join("model.json");
    let meta: CheckpointMeta = serde_json::from_str(
        &std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?,
    )
    .map_err(|e| Error::MalformedFile {
        path: meta_path.display().to_string(),
        message: e.to_string(),
    })?;

    let weights_path = dir.join("weights.csv");
    let text =
        std::fs::read_to_string(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
    let malformed = |message: String| Error::MalformedFile {
        path: weights_path.display().to_string(),
        message,
    };

    let mut tensors: Vec<nalgebra::DMatrix<f64>> = expected_shapes(meta.shapes)
        .into_iter()
        .map(|(r, c)| nalgebra::DMatrix::zeros(r, c))
        .collect();
    let mut filled = vec![0usize; tensors.len()];

    let mut lines = text.lines();
    match lines.next() {
        Some("param,row,col,value") => {}
        other => {
            return Err(malformed(format!(
                "bad header {:?}, expected 'param,row,col,value'",
                other
            )))
        }
    }
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(malformed(format!("line {}: expected 4 fields", i + 2)));
        }
        let idx = PARAM_NAMES
            .iter()
            .position(|&n| n == parts[0])
            .ok_or_else(|| malformed(format!("line {}: unknown param '{}'", i + 2, parts[0])))?;
        let row: usize = parts[1]
            .parse()
            .map_err(|_| malformed(format!("line {}: bad row", i + 2)))?;
        let col: usize = parts[2]
            .parse()
            .map_err(|_| malformed(format!("line {}: bad col", i + 2)))?;
        let value: f64 = parts[3]
            .parse()
            .map_err(|_| malformed(format!("line {}: bad value", i + 2)))?;
        let t = &mut tensors[idx];
        if row >= t.nrows() || col >= t.ncols() {
            return Err(malformed(format!(
                "line {}: index ({row},{col}) out of bounds for {}",
                i + 2,
                parts[0]
            )));
        }
        t[(row, col)] = value;
        filled[idx] += 1;
    }
    for (idx, t) in tensors.iter().enumerate() {
        if filled[idx] != t.nrows() * t.ncols() {
            return Err(malformed(format!(
                "param '{}' has {} entries, expected {}",
                PARAM_NAMES[idx],
                filled[idx],
                t.nrows() * t.ncols()
            )));
        }
    }

    let params = ModelParams::from_parts(meta.shapes, tensors)?;
    Ok((params, meta))
}
