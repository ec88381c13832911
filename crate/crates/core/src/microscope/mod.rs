//! Residual-level classification.
//!
//! Each residual of a segment is summarised by a fixed-size descriptor; the
//! descriptors are concatenated in temporal order and scored by a logistic
//! model trained on labelled sequences.

mod classifier;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{change_stats, ChangeStats};
use crate::residual::{ResidualMap, ResidualStack, DEFAULT_MASK_THRESHOLD};
use crate::sentinel::ScoreMatrix;
use crate::stats::{entropy_bits, population_std};

pub use classifier::{
    classify, loss_and_gradient, train, Classification, ClassifierModel, Dataset, TrainConfig,
    TrainReport, MODEL_FORMAT,
};

/// Values per residual: the change statistics plus mean, std and entropy.
pub const DESCRIPTOR_LEN: usize = ChangeStats::FIELD_COUNT + 3;

#[derive(Debug, Error)]
pub enum MicroscopeError {
    #[error("training needs at least 2 examples of each class, got {ai} AI and {real} real")]
    TooFewPerClass { ai: usize, real: usize },
    #[error("feature vector has {actual} values, model expects {expected}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("dataset rows have inconsistent lengths")]
    RaggedDataset,
    #[error("non-finite feature value at index {0}")]
    NonFinite(usize),
    #[error("invalid training setting: {0}")]
    InvalidConfig(String),
    #[error("model file {path}: {reason}")]
    ModelFile { path: String, reason: String },
}

impl MicroscopeError {
    pub fn kind(&self) -> &'static str {
        match self {
            MicroscopeError::TooFewPerClass { .. } => "single_class",
            MicroscopeError::DimMismatch { .. } => "dim_mismatch",
            MicroscopeError::RaggedDataset => "ragged_dataset",
            MicroscopeError::NonFinite(_) => "non_finite",
            MicroscopeError::InvalidConfig(_) => "invalid_config",
            MicroscopeError::ModelFile { .. } => "model_file",
        }
    }
}

/// Concatenated per-residual descriptors, in temporal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualFeatureVector {
    pub per_residual: usize,
    pub values: Vec<f64>,
}

impl ResidualFeatureVector {
    pub fn residual_count(&self) -> usize {
        self.values.len().checked_div(self.per_residual).unwrap_or(0)
    }

    pub fn descriptor(&self, i: usize) -> &[f64] {
        &self.values[i * self.per_residual..(i + 1) * self.per_residual]
    }
}

/// Mean, population std and 256-bin entropy (bits) of one map.
pub fn intensity_summary(map: &ResidualMap) -> (f64, f64, f64) {
    let values: Vec<f64> = map.data().iter().map(|&v| v as f64).collect();
    let mut hist = [0u64; 256];
    for &v in &values {
        hist[v.round().clamp(0.0, 255.0) as usize] += 1;
    }
    let mean = crate::stats::mean(&values);
    (mean, population_std(&values), entropy_bits(&hist))
}

pub fn describe_residual(map: &ResidualMap, mask_threshold: f32) -> [f64; DESCRIPTOR_LEN] {
    let stats = change_stats(map, mask_threshold);
    let (mean, std, entropy) = intensity_summary(map);
    let mut out = [0.0; DESCRIPTOR_LEN];
    out[..ChangeStats::FIELD_COUNT].copy_from_slice(&stats.as_array());
    out[ChangeStats::FIELD_COUNT] = mean;
    out[ChangeStats::FIELD_COUNT + 1] = std;
    out[ChangeStats::FIELD_COUNT + 2] = entropy;
    out
}

pub fn featurize(stack: &ResidualStack) -> ResidualFeatureVector {
    featurize_with(stack, DEFAULT_MASK_THRESHOLD)
}

pub fn featurize_with(stack: &ResidualStack, mask_threshold: f32) -> ResidualFeatureVector {
    let values = stack
        .maps()
        .iter()
        .flat_map(|m| describe_residual(m, mask_threshold))
        .collect();
    ResidualFeatureVector {
        per_residual: DESCRIPTOR_LEN,
        values,
    }
}

/// Uses externally computed per-residual embeddings (one row per residual)
/// as the descriptor.
pub fn features_from_embeddings(rows: &ScoreMatrix) -> ResidualFeatureVector {
    ResidualFeatureVector {
        per_residual: rows.dim(),
        values: rows.values().iter().map(|&v| v as f64).collect(),
    }
}
