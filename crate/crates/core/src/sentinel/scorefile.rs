//! Binary score container (`.mpfs`).
//!
//! ```text
//! offset size  field
//!      0    4  magic "MPFS"
//!      4    2  version (u16 LE) = 1
//!      6    4  num_frames (u32 LE)
//!     10    4  dim (u32 LE)
//!     14    1  kind (u8): 0 = logits, 1 = embeddings
//!     15    .. num_frames * dim f32 LE, row-major (one row per frame)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SentinelError;

pub const SCORE_MAGIC: &[u8; 4] = b"MPFS";
pub const SCORE_VERSION: u16 = 1;
pub const SCORE_HEADER_LEN: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Logits,
    Embeddings,
}

impl ScoreKind {
    pub fn code(&self) -> u8 {
        match self {
            ScoreKind::Logits => 0,
            ScoreKind::Embeddings => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self, SentinelError> {
        match code {
            0 => Ok(ScoreKind::Logits),
            1 => Ok(ScoreKind::Embeddings),
            other => Err(SentinelError::BadKind(other)),
        }
    }
}

/// Per-frame rows of logits or embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    num_frames: usize,
    dim: usize,
    kind: ScoreKind,
    values: Vec<f32>,
}

impl ScoreMatrix {
    pub fn new(
        num_frames: usize,
        dim: usize,
        kind: ScoreKind,
        values: Vec<f32>,
    ) -> Result<Self, SentinelError> {
        if values.len() != num_frames * dim {
            return Err(SentinelError::SizeMismatch {
                expected: num_frames * dim * 4,
                actual: values.len() * 4,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(SentinelError::NonFinite { index: pos });
        }
        if kind == ScoreKind::Logits && dim != 1 {
            return Err(SentinelError::DimMismatch {
                expected: 1,
                actual: dim,
            });
        }
        Ok(ScoreMatrix {
            num_frames,
            dim,
            kind,
            values,
        })
    }

    pub fn logits(values: Vec<f32>) -> Result<Self, SentinelError> {
        ScoreMatrix::new(values.len(), 1, ScoreKind::Logits, values)
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SCORE_HEADER_LEN + self.values.len() * 4);
        out.extend_from_slice(SCORE_MAGIC);
        out.extend_from_slice(&SCORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.num_frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(self.kind.code());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, SentinelError> {
        if data.len() < SCORE_HEADER_LEN {
            return Err(SentinelError::SizeMismatch {
                expected: SCORE_HEADER_LEN,
                actual: data.len(),
            });
        }
        if &data[0..4] != SCORE_MAGIC {
            return Err(SentinelError::BadMagic);
        }
        let version = u16::from_le_bytes([data[4], data[5]]);
        if version != SCORE_VERSION {
            return Err(SentinelError::BadVersion(version));
        }
        let num_frames = u32::from_le_bytes([data[6], data[7], data[8], data[9]]) as usize;
        let dim = u32::from_le_bytes([data[10], data[11], data[12], data[13]]) as usize;
        let kind = ScoreKind::from_code(data[14])?;
        let expected = SCORE_HEADER_LEN + num_frames * dim * 4;
        if data.len() != expected {
            return Err(SentinelError::SizeMismatch {
                expected,
                actual: data.len(),
            });
        }
        let values = data[SCORE_HEADER_LEN..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        ScoreMatrix::new(num_frames, dim, kind, values)
    }
}

pub fn read_scores(path: &Path) -> Result<ScoreMatrix, SentinelError> {
    let data = fs::read(path).map_err(|e| SentinelError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    ScoreMatrix::from_bytes(&data)
}

pub fn write_scores(path: &Path, scores: &ScoreMatrix) -> Result<(), SentinelError> {
    fs::write(path, scores.to_bytes()).map_err(|e| SentinelError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}
