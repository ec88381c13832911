//! Frame-level gate.
//!
//! Per-frame logits (from an external backbone via a score file, or from the
//! built-in null scorer) are averaged over the segment and compared with a
//! threshold `tau`. A mean strictly above `tau` marks the video as generated
//! and ends the analysis; anything else is passed on to the residual stage.

mod scorefile;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::FrameSequence;

pub use scorefile::{
    read_scores, write_scores, ScoreKind, ScoreMatrix, SCORE_HEADER_LEN, SCORE_MAGIC,
    SCORE_VERSION,
};

pub const DEFAULT_TAU: f64 = 0.0;

/// Logit emitted by the null scorer for every frame.
pub const NULL_LOGIT: f64 = -1e9;

#[derive(Debug, Error)]
pub enum SentinelError {
    #[error("bad magic, expected MPFS")]
    BadMagic,
    #[error("unsupported score file version {0}")]
    BadVersion(u16),
    #[error("unknown score kind {0}")]
    BadKind(u8),
    #[error("size mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("non-finite value at payload index {index}")]
    NonFinite { index: usize },
    #[error("dimension mismatch: expected {expected}, found {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("embedding scores need a linear head")]
    MissingHead,
    #[error("cannot aggregate an empty score list")]
    Empty,
    #[error("score file has {rows} rows, cannot cover frames {start}..{end}")]
    RowsMismatch { rows: usize, start: usize, end: usize },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

impl SentinelError {
    pub fn kind(&self) -> &'static str {
        match self {
            SentinelError::BadMagic => "bad_magic",
            SentinelError::BadVersion(_) => "bad_version",
            SentinelError::BadKind(_) => "bad_kind",
            SentinelError::SizeMismatch { .. } => "size_mismatch",
            SentinelError::NonFinite { .. } => "non_finite",
            SentinelError::DimMismatch { .. } => "dim_mismatch",
            SentinelError::MissingHead => "missing_head",
            SentinelError::Empty => "empty",
            SentinelError::RowsMismatch { .. } => "rows_mismatch",
            SentinelError::Io { .. } => "io",
        }
    }
}

/// Linear projection from an embedding to a logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearHead {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self, SentinelError> {
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(SentinelError::NonFinite { index });
        }
        if !bias.is_finite() {
            return Err(SentinelError::NonFinite {
                index: weights.len(),
            });
        }
        Ok(LinearHead { weights, bias })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, embedding: &[f32]) -> f64 {
        self.weights
            .iter()
            .zip(embedding)
            .map(|(w, &e)| w * e as f64)
            .sum::<f64>()
            + self.bias
    }

    pub fn load(path: &Path) -> Result<Self, SentinelError> {
        let text = fs::read_to_string(path).map_err(|e| SentinelError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let head: LinearHead = serde_json::from_str(&text).map_err(|e| SentinelError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        LinearHead::new(head.weights, head.bias)
    }
}

/// Turns a score matrix into one logit per frame.
pub fn frame_logits(
    scores: &ScoreMatrix,
    head: Option<&LinearHead>,
) -> Result<Vec<f64>, SentinelError> {
    match scores.kind() {
        ScoreKind::Logits => Ok(scores.values().iter().map(|&v| v as f64).collect()),
        ScoreKind::Embeddings => {
            let head = head.ok_or(SentinelError::MissingHead)?;
            if head.dim() != scores.dim() {
                return Err(SentinelError::DimMismatch {
                    expected: head.dim(),
                    actual: scores.dim(),
                });
            }
            Ok((0..scores.num_frames())
                .map(|i| head.apply(scores.row(i)))
                .collect())
        }
    }
}

/// Reads a score file and projects it to per-frame logits.
pub fn load_scores(path: &Path, head: Option<&LinearHead>) -> Result<Vec<f64>, SentinelError> {
    let matrix = read_scores(path)?;
    frame_logits(&matrix, head)
}

/// Combines per-frame logits into one sequence score.
pub trait Aggregation {
    fn aggregate(&self, logits: &[f64]) -> Result<f64, SentinelError>;
}

/// Arithmetic mean of the logits.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanLogits;

impl Aggregation for MeanLogits {
    fn aggregate(&self, logits: &[f64]) -> Result<f64, SentinelError> {
        aggregate_mean(logits)
    }
}

pub fn aggregate_mean(logits: &[f64]) -> Result<f64, SentinelError> {
    if logits.is_empty() {
        return Err(SentinelError::Empty);
    }
    Ok(logits.iter().sum::<f64>() / logits.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateVerdict {
    /// Generated; the analysis stops here.
    OffManifold,
    /// Passed on to the residual stage.
    OnManifold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub s_agg: f64,
    pub tau: f64,
    pub verdict: GateVerdict,
}

/// `s_agg > tau` is off-manifold; ties pass on.
pub fn gate(s_agg: f64, tau: f64) -> GateDecision {
    let verdict = if s_agg > tau {
        GateVerdict::OffManifold
    } else {
        GateVerdict::OnManifold
    };
    GateDecision {
        s_agg,
        tau,
        verdict,
    }
}

/// Produces one logit per frame of a segment.
pub trait FrameScorer {
    fn score_frames(&self, seq: &FrameSequence) -> Result<Vec<f64>, SentinelError>;
}

/// Scores every frame [`NULL_LOGIT`], so the gate always passes.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullScorer;

impl FrameScorer for NullScorer {
    fn score_frames(&self, seq: &FrameSequence) -> Result<Vec<f64>, SentinelError> {
        Ok(vec![NULL_LOGIT; seq.len()])
    }
}

/// Logits precomputed for a whole source, one row per source frame.
#[derive(Debug, Clone)]
pub struct PrecomputedScorer {
    logits: Vec<f64>,
}

impl PrecomputedScorer {
    pub fn new(logits: Vec<f64>) -> Self {
        PrecomputedScorer { logits }
    }

    pub fn from_file(path: &Path, head: Option<&LinearHead>) -> Result<Self, SentinelError> {
        Ok(PrecomputedScorer::new(load_scores(path, head)?))
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

impl FrameScorer for PrecomputedScorer {
    /// Rows covering the segment window; a file with exactly one row per
    /// segment frame is taken as already windowed.
    fn score_frames(&self, seq: &FrameSequence) -> Result<Vec<f64>, SentinelError> {
        let start = seq.start_index();
        let end = start + seq.len();
        if self.logits.len() == seq.source_len() && end <= self.logits.len() {
            Ok(self.logits[start..end].to_vec())
        } else if self.logits.len() == seq.len() {
            Ok(self.logits.clone())
        } else {
            Err(SentinelError::RowsMismatch {
                rows: self.logits.len(),
                start,
                end,
            })
        }
    }
}

/// Scores, aggregates and gates one segment.
pub fn run_gate(
    scorer: &dyn FrameScorer,
    aggregation: &dyn Aggregation,
    seq: &FrameSequence,
    tau: f64,
) -> Result<GateDecision, SentinelError> {
    let logits = scorer.score_frames(seq)?;
    Ok(gate(aggregation.aggregate(&logits)?, tau))
}
