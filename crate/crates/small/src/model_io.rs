//! JSON model files.
//!
//! A model file is one JSON object:
//!
//! ```text
//! format         "small-model"
//! version        1
//! p, n, k        prototype count, feature count, per-prototype budget
//! lambda         L2 coefficient used in training
//! feature_names  n strings
//! mean, scale    standardizer, n numbers each
//! prototypes     p rows of n numbers (weights on standardized features)
//! bias           p numbers (zero unless trained with an intercept)
//! training       alpha, beta, iterations, tol, seed, gradient_mode, refit, intercept
//! metadata       seed, iterations, objective
//! ```
//!
//! Floats are written with round-trip precision, so a loaded model
//! reproduces decision values bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use small_core::{GradientMode, Matrix, ModelMetadata, SolverConfig, Standardizer, TrainedModel};

pub const FORMAT: &str = "small-model";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a model file: {0}")]
    Corrupt(String),
    #[error("unsupported model version {found} (this build reads version {VERSION})")]
    Version { found: u64 },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("inconsistent model: {0}")]
    Model(#[from] small_core::Error),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainingRecord {
    alpha: f64,
    beta: f64,
    iterations: usize,
    tol: f64,
    seed: u64,
    gradient_mode: String,
    refit: bool,
    intercept: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetadataRecord {
    seed: u64,
    iterations: usize,
    objective: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    p: usize,
    n: usize,
    k: usize,
    lambda: f64,
    feature_names: Vec<String>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    prototypes: Vec<Vec<f64>>,
    bias: Vec<f64>,
    training: TrainingRecord,
    metadata: MetadataRecord,
}

pub fn mode_name(mode: GradientMode) -> &'static str {
    match mode {
        GradientMode::Consistent => "consistent",
        GradientMode::Reduced => "reduced",
    }
}

pub fn parse_mode(s: &str) -> Option<GradientMode> {
    match s {
        "consistent" => Some(GradientMode::Consistent),
        "reduced" => Some(GradientMode::Reduced),
        _ => None,
    }
}

/// Serialized model text.
pub fn to_json(model: &TrainedModel) -> String {
    let cfg = model.config();
    let meta = model.metadata();
    let file = ModelFile {
        format: FORMAT.to_string(),
        version: VERSION,
        p: model.prototypes(),
        n: model.n_features(),
        k: cfg.k,
        lambda: cfg.lambda,
        feature_names: model.feature_names().to_vec(),
        mean: model.standardizer().mean().to_vec(),
        scale: model.standardizer().scale().to_vec(),
        prototypes: model.weights().row_iter().map(<[f64]>::to_vec).collect(),
        bias: model.bias().to_vec(),
        training: TrainingRecord {
            alpha: cfg.alpha,
            beta: cfg.beta,
            iterations: cfg.iterations,
            tol: cfg.tol,
            seed: cfg.seed,
            gradient_mode: mode_name(cfg.gradient_mode).to_string(),
            refit: cfg.refit,
            intercept: cfg.intercept,
        },
        metadata: MetadataRecord {
            seed: meta.seed,
            iterations: meta.iterations,
            objective: meta.objective,
        },
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model fields are serializable");
    text.push('\n');
    text
}

pub fn from_json(text: &str) -> Result<TrainedModel, ModelIoError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ModelIoError::Corrupt(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ModelIoError::Corrupt("top level is not an object".into()))?;
    if obj.get("format").and_then(|f| f.as_str()) != Some(FORMAT) {
        return Err(ModelIoError::Corrupt(format!("missing \"format\": \"{FORMAT}\"")));
    }
    match obj.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(VERSION) => {}
        Some(found) => return Err(ModelIoError::Version { found }),
        None => return Err(ModelIoError::Schema("missing field `version`".into())),
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| ModelIoError::Schema(e.to_string()))?;

    let schema = |msg: String| Err(ModelIoError::Schema(msg));
    if file.prototypes.len() != file.p {
        return schema(format!("p = {} but {} prototype rows", file.p, file.prototypes.len()));
    }
    if let Some(j) = file.prototypes.iter().position(|r| r.len() != file.n) {
        return schema(format!("prototype row {j} does not have n = {} entries", file.n));
    }
    let gradient_mode = parse_mode(&file.training.gradient_mode).ok_or_else(|| {
        ModelIoError::Schema(format!("unknown gradient_mode {:?}", file.training.gradient_mode))
    })?;
    let config = SolverConfig {
        lambda: file.lambda,
        k: file.k,
        p: file.p,
        alpha: file.training.alpha,
        beta: file.training.beta,
        iterations: file.training.iterations,
        tol: file.training.tol,
        seed: file.training.seed,
        gradient_mode,
        refit: file.training.refit,
        intercept: file.training.intercept,
        ..SolverConfig::default()
    };
    let weights = Matrix::from_rows(&file.prototypes)?;
    let standardizer = Standardizer::from_parts(file.mean, file.scale)?;
    Ok(TrainedModel::new(
        weights,
        file.bias,
        standardizer,
        file.feature_names,
        config,
        ModelMetadata {
            seed: file.metadata.seed,
            iterations: file.metadata.iterations,
            objective: file.metadata.objective,
        },
    )?)
}

/// Writes to a temporary sibling first and renames it into place, so a
/// failed save never leaves a partial model at `path`.
pub fn save(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    write_atomic(path.as_ref(), to_json(model).as_bytes())
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel, ModelIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_json(&text)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ModelIoError> {
    let io = |source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let name = path
        .file_name()
        .ok_or_else(|| io(std::io::Error::other("path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|()| f.sync_all()))
        .and_then(|()| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}
