//! Versioned JSON checkpoints for embeddings and comparators.
//!
//! ```json
//! {
//!   "format": "ktuplet-checkpoint",
//!   "version": 1,
//!   "kind": "embedding",
//!   "layer_dims": [16, 64, 64, 32],
//!   "hidden_activation": "relu",
//!   "output": "l2-normalize",
//!   "layers": [{ "weights": [...], "bias": [...] }, ...]
//! }
//! ```
//!
//! `weights` of layer `l` is the row-major `layer_dims[l] × layer_dims[l+1]`
//! matrix (input index major). Floats are written in shortest round-trip form
//! and parsed exactly, so `load(save(m)) == m` bit for bit.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::comparator::Comparator;
use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{Dense, Mlp, OutputActivation};

pub const FORMAT: &str = "ktuplet-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Embedding,
    Comparator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerRecord {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    kind: ModelKind,
    layer_dims: Vec<usize>,
    hidden_activation: String,
    output: String,
    layers: Vec<LayerRecord>,
}

fn output_tag(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Embedding => "l2-normalize",
        ModelKind::Comparator => "sigmoid",
    }
}

fn encode(net: &Mlp, kind: ModelKind) -> CheckpointFile {
    CheckpointFile {
        format: FORMAT.into(),
        version: VERSION,
        kind,
        layer_dims: net.dims().to_vec(),
        hidden_activation: "relu".into(),
        output: output_tag(kind).into(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                weights: l.weights.as_slice().to_vec(),
                bias: l.bias.clone(),
            })
            .collect(),
    }
}

fn decode(file: CheckpointFile, expected: ModelKind) -> Result<Mlp> {
    let bad = |m: String| Err(Error::Checkpoint(m));
    if file.format != FORMAT {
        return bad(format!("unknown format {:?}", file.format));
    }
    if file.version != VERSION {
        return bad(format!("unsupported version {}", file.version));
    }
    if file.kind != expected {
        return bad(format!(
            "expected a {expected:?} checkpoint, found {:?}",
            file.kind
        ));
    }
    if file.hidden_activation != "relu" || file.output != output_tag(expected) {
        return bad("unsupported activation tags".into());
    }
    if file.layer_dims.len() != file.layers.len() + 1 {
        return bad("layer_dims does not match the number of layers".into());
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (i, rec) in file.layers.into_iter().enumerate() {
        let (n_in, n_out) = (file.layer_dims[i], file.layer_dims[i + 1]);
        let weights = Matrix::from_vec(n_in, n_out, rec.weights)
            .map_err(|e| Error::Checkpoint(format!("layer {i} weights: {e}")))?;
        if rec.bias.len() != n_out {
            return bad(format!(
                "layer {i} bias has {} entries, expected {n_out}",
                rec.bias.len()
            ));
        }
        layers.push(Dense {
            weights,
            bias: rec.bias,
        });
    }
    let activation = match expected {
        ModelKind::Embedding => OutputActivation::Identity,
        ModelKind::Comparator => OutputActivation::Sigmoid,
    };
    Mlp::from_layers(layers, activation).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn embedding_to_json(model: &EmbeddingModel) -> Result<String> {
    Ok(serde_json::to_string(&encode(
        model.network(),
        ModelKind::Embedding,
    ))?)
}

pub fn embedding_from_json(s: &str) -> Result<EmbeddingModel> {
    let file: CheckpointFile =
        serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))?;
    EmbeddingModel::from_network(decode(file, ModelKind::Embedding)?)
}

pub fn comparator_to_json(model: &Comparator) -> Result<String> {
    Ok(serde_json::to_string(&encode(
        model.network(),
        ModelKind::Comparator,
    ))?)
}

pub fn comparator_from_json(s: &str) -> Result<Comparator> {
    let file: CheckpointFile =
        serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Comparator::from_network(decode(file, ModelKind::Comparator)?)
}

pub fn save_embedding(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let json = embedding_to_json(model)?;
    write_atomic(path, |w| Ok(w.write_all(json.as_bytes())?))
}

pub fn load_embedding(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    embedding_from_json(&read_to_string(path.as_ref())?)
}

pub fn save_comparator(model: &Comparator, path: impl AsRef<Path>) -> Result<()> {
    let json = comparator_to_json(model)?;
    write_atomic(path, |w| Ok(w.write_all(json.as_bytes())?))
}

pub fn load_comparator(path: impl AsRef<Path>) -> Result<Comparator> {
    comparator_from_json(&read_to_string(path.as_ref())?)
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed write never leaves a partial file at `path`.
pub fn write_atomic<F>(path: impl AsRef<Path>, write: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<&mut tempfile::NamedTempFile>) -> Result<()>,
{
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(path, e))?;
    {
        let mut w = std::io::BufWriter::new(&mut tmp);
        write(&mut w)?;
        w.flush().map_err(|e| Error::file(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}
