//! JSON checkpoint container for both model kinds.
//!
//! ```json
//! { "kind": "mlp", "seed": 7, "spec": {...},
//!   "transform": { "price": { "median": 41.2, "mad": 9.8 }, ... },
//!   "layers": [ { "rows": 64, "cols": 343, "weights": [...], "bias": [...],
//!                 "activation": "relu", "trainable": true }, ... ] }
//! ```
//!
//! Weights are row-major `rows x cols` (`out x in`). Floats are written in
//! shortest round-trip form, so a save/load cycle is exact.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::linear::LearModel;
use crate::neural::{Activation, DenseLayer, MlpModel};
use crate::transform::TransformParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
    trainable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MlpRecord {
    kind: String,
    seed: u64,
    spec: Option<FeatureSpec>,
    transform: BTreeMap<String, TransformParams>,
    layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LearRecord {
    kind: String,
    spec: Option<FeatureSpec>,
    transform: BTreeMap<String, TransformParams>,
    model: LearModel,
}

/// A LEAR model plus the transforms needed to invert its output.
#[derive(Debug, Clone, PartialEq)]
pub struct LearCheckpoint {
    pub model: LearModel,
    pub transforms: BTreeMap<String, TransformParams>,
    pub spec: Option<FeatureSpec>,
}

fn parse<T: DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| Error::Checkpoint {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn check_kind(value: &serde_json::Value, expected: &str) -> Result<()> {
    match value.get("kind").and_then(|k| k.as_str()) {
        Some(k) if k == expected => Ok(()),
        Some(k) => Err(Error::Checkpoint {
            path: "kind".into(),
            message: format!("expected `{expected}`, found `{k}`"),
        }),
        None => Err(Error::Checkpoint {
            path: "kind".into(),
            message: "missing field `kind`".into(),
        }),
    }
}

fn check_transforms(transforms: &BTreeMap<String, TransformParams>) -> Result<()> {
    for (group, t) in transforms {
        if !(t.mad > 0.0) || !t.mad.is_finite() || !t.median.is_finite() {
            return Err(Error::Checkpoint {
                path: format!("transform.{group}.mad"),
                message: "mad must be positive and finite".into(),
            });
        }
    }
    Ok(())
}

pub fn mlp_to_json(model: &MlpModel) -> Result<String> {
    let record = MlpRecord {
        kind: "mlp".into(),
        seed: model.seed,
        spec: model.spec,
        transform: model.transforms.clone(),
        layers: model
            .layers
            .iter()
            .map(|l| LayerRecord {
                rows: l.weights.nrows(),
                cols: l.weights.ncols(),
                weights: l.weights.iter().copied().collect(),
                bias: l.bias.to_vec(),
                activation: l.activation,
                trainable: l.trainable,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&record)?)
}

pub fn mlp_from_json(text: &str) -> Result<MlpModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    check_kind(&value, "mlp")?;
    let record: MlpRecord = parse(value)?;
    check_transforms(&record.transform)?;
    if record.layers.is_empty() {
        return Err(Error::Checkpoint {
            path: "layers".into(),
            message: "no layers".into(),
        });
    }
    let mut layers = Vec::with_capacity(record.layers.len());
    for (i, l) in record.layers.into_iter().enumerate() {
        let bad = |field: &str, message: String| Error::Checkpoint {
            path: format!("layers[{i}].{field}"),
            message,
        };
        let weights = Array2::from_shape_vec((l.rows, l.cols), l.weights)
            .map_err(|e| bad("weights", e.to_string()))?;
        if l.bias.len() != l.rows {
            return Err(bad("bias", format!("expected {} entries, found {}", l.rows, l.bias.len())));
        }
        if let Some(prev) = layers.last().map(|p: &DenseLayer| p.output_dim()) {
            if prev != l.cols {
                return Err(bad("cols", format!("expected {prev}, found {}", l.cols)));
            }
        }
        layers.push(DenseLayer {
            weights,
            bias: Array1::from(l.bias),
            activation: l.activation,
            trainable: l.trainable,
        });
    }
    Ok(MlpModel {
        layers,
        transforms: record.transform,
        seed: record.seed,
        spec: record.spec,
    })
}

pub fn lear_to_json(ckpt: &LearCheckpoint) -> Result<String> {
    let record = LearRecord {
        kind: "lear".into(),
        spec: ckpt.spec,
        transform: ckpt.transforms.clone(),
        model: ckpt.model.clone(),
    };
    Ok(serde_json::to_string_pretty(&record)?)
}

pub fn lear_from_json(text: &str) -> Result<LearCheckpoint> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    check_kind(&value, "lear")?;
    let record: LearRecord = parse(value)?;
    check_transforms(&record.transform)?;
    record.model.validate().map_err(|e| Error::Checkpoint {
        path: "model".into(),
        message: e.to_string(),
    })?;
    Ok(LearCheckpoint {
        model: record.model,
        transforms: record.transform,
        spec: record.spec,
    })
}

fn write(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn save_checkpoint(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), mlp_to_json(model)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpModel> {
    mlp_from_json(&read(path.as_ref())?)
}

pub fn save_lear(ckpt: &LearCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), lear_to_json(ckpt)?)
}

pub fn load_lear(path: impl AsRef<Path>) -> Result<LearCheckpoint> {
    lear_from_json(&read(path.as_ref())?)
}
