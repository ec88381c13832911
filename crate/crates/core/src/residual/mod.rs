//! Inter-frame residuals and their enhancement strategies.
//!
//! Every strategy maps an adjacent frame pair `(I_t, I_{t+1})` to a map with
//! values in `[0, 255]`, kept as `f32` so that sub-integer fluctuations
//! survive until export.

mod export;
mod flow;
pub mod spectrum;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::{Frame, FrameSequence};

pub use export::{read_stack, write_stack, ResidualManifest, EXPORT_SCALE, MANIFEST_NAME};
pub use flow::{block_flow, block_vectors, BlockVector};

pub const DEFAULT_ALPHA: f32 = 10.0;
pub const DEFAULT_MASK_THRESHOLD: f32 = 5.0;
pub const DEFAULT_FLOW_BLOCK: usize = 8;
pub const DEFAULT_FLOW_RADIUS: usize = 4;

#[derive(Debug, Error)]
pub enum ResidualError {
    #[error("need at least 2 frames to form residuals, got {0}")]
    TooFewFrames(usize),
    #[error("scale factor must be positive and finite, got {0}")]
    InvalidAlpha(f32),
    #[error("mask threshold must lie in [0, 255], got {0}")]
    InvalidThreshold(f32),
    #[error("flow block size must be positive")]
    InvalidBlock,
    #[error("frame shapes differ: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize, usize), (usize, usize, usize)),
    #[error("residual map holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("{path}: {reason}")]
    Export { path: String, reason: String },
}

impl ResidualError {
    pub fn kind(&self) -> &'static str {
        match self {
            ResidualError::TooFewFrames(_) => "too_few_frames",
            ResidualError::InvalidAlpha(_) => "invalid_alpha",
            ResidualError::InvalidThreshold(_) => "invalid_threshold",
            ResidualError::InvalidBlock => "invalid_block",
            ResidualError::ShapeMismatch(..) => "shape_mismatch",
            ResidualError::BufferSize { .. } => "buffer_size",
            ResidualError::UnknownStrategy(_) => "unknown_strategy",
            ResidualError::Export { .. } => "export",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Normalized,
    ChangeMask,
    LogScale,
    FrequencyDomain,
    OpticalFlow,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Normalized,
        Strategy::ChangeMask,
        Strategy::LogScale,
        Strategy::FrequencyDomain,
        Strategy::OpticalFlow,
    ];

    /// Short name used on the command line.
    pub fn cli_name(&self) -> &'static str {
        match self {
            Strategy::Normalized => "normalized",
            Strategy::ChangeMask => "mask",
            Strategy::LogScale => "log",
            Strategy::FrequencyDomain => "freq",
            Strategy::OpticalFlow => "flow",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.cli_name())
    }
}

impl FromStr for Strategy {
    type Err = ResidualError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normalized" => Ok(Strategy::Normalized),
            "mask" | "change_mask" => Ok(Strategy::ChangeMask),
            "log" | "log_scale" => Ok(Strategy::LogScale),
            "freq" | "frequency_domain" => Ok(Strategy::FrequencyDomain),
            "flow" | "optical_flow" => Ok(Strategy::OpticalFlow),
            other => Err(ResidualError::UnknownStrategy(other.to_string())),
        }
    }
}

/// A strategy together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Enhancement {
    Normalized { alpha: f32 },
    ChangeMask { threshold: f32 },
    LogScale,
    FrequencyDomain,
    OpticalFlow { block: usize, radius: usize },
}

impl Enhancement {
    pub fn strategy(&self) -> Strategy {
        match self {
            Enhancement::Normalized { .. } => Strategy::Normalized,
            Enhancement::ChangeMask { .. } => Strategy::ChangeMask,
            Enhancement::LogScale => Strategy::LogScale,
            Enhancement::FrequencyDomain => Strategy::FrequencyDomain,
            Enhancement::OpticalFlow { .. } => Strategy::OpticalFlow,
        }
    }

    /// The default parameterization of a strategy.
    pub fn with_defaults(strategy: Strategy) -> Self {
        match strategy {
            Strategy::Normalized => Enhancement::Normalized {
                alpha: DEFAULT_ALPHA,
            },
            Strategy::ChangeMask => Enhancement::ChangeMask {
                threshold: DEFAULT_MASK_THRESHOLD,
            },
            Strategy::LogScale => Enhancement::LogScale,
            Strategy::FrequencyDomain => Enhancement::FrequencyDomain,
            Strategy::OpticalFlow => Enhancement::OpticalFlow {
                block: DEFAULT_FLOW_BLOCK,
                radius: DEFAULT_FLOW_RADIUS,
            },
        }
    }

    /// Scale factor of the normalized strategy; 1 for every other strategy.
    pub fn alpha(&self) -> f32 {
        match self {
            Enhancement::Normalized { alpha } => *alpha,
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ResidualError> {
        match *self {
            Enhancement::Normalized { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(ResidualError::InvalidAlpha(alpha))
            }
            Enhancement::ChangeMask { threshold } if !(0.0..=255.0).contains(&threshold) => {
                Err(ResidualError::InvalidThreshold(threshold))
            }
            Enhancement::OpticalFlow { block: 0, .. } => Err(ResidualError::InvalidBlock),
            _ => Ok(()),
        }
    }

    /// Enhanced residual of one adjacent pair.
    pub fn apply_pair(&self, prev: &Frame, next: &Frame) -> Result<ResidualMap, ResidualError> {
        if prev.shape() != next.shape() {
            return Err(ResidualError::ShapeMismatch(prev.shape(), next.shape()));
        }
        Ok(match *self {
            Enhancement::Normalized { alpha } => normalized_pair(prev, next, alpha),
            Enhancement::ChangeMask { threshold } => change_mask_pair(prev, next, threshold),
            Enhancement::LogScale => log_scale_pair(prev, next),
            Enhancement::FrequencyDomain => spectrum::frequency_pair(prev, next),
            Enhancement::OpticalFlow { block, radius } => block_flow(prev, next, block, radius),
        })
    }
}

/// One enhanced residual, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ResidualMap {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, ResidualError> {
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(ResidualError::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(ResidualMap {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        ResidualMap {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Sum over channels at each pixel, row-major `H*W`.
    pub fn pixel_mass(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.channels)
            .map(|px| px.iter().map(|&v| v as f64).sum())
            .collect()
    }

    pub fn scaled(&self, factor: f32) -> ResidualMap {
        ResidualMap {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// The `L-1` enhanced residuals of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStack {
    maps: Vec<ResidualMap>,
    enhancement: Enhancement,
}

impl ResidualStack {
    pub fn new(maps: Vec<ResidualMap>, enhancement: Enhancement) -> Self {
        ResidualStack { maps, enhancement }
    }

    pub fn maps(&self) -> &[ResidualMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn strategy(&self) -> Strategy {
        self.enhancement.strategy()
    }

    pub fn enhancement(&self) -> Enhancement {
        self.enhancement
    }

    pub fn alpha(&self) -> f32 {
        self.enhancement.alpha()
    }

    /// Same maps in reverse temporal order.
    pub fn reversed(&self) -> ResidualStack {
        let mut maps = self.maps.clone();
        maps.reverse();
        ResidualStack {
            maps,
            enhancement: self.enhancement,
        }
    }
}

/// Applies `enhancement` to every adjacent pair of `seq`, in temporal order.
pub fn compute_stack(
    seq: &FrameSequence,
    enhancement: Enhancement,
) -> Result<ResidualStack, ResidualError> {
    enhancement.validate()?;
    if seq.len() < 2 {
        return Err(ResidualError::TooFewFrames(seq.len()));
    }
    let maps = seq
        .frames()
        .par_windows(2)
        .map(|pair| enhancement.apply_pair(&pair[0], &pair[1]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ResidualStack::new(maps, enhancement))
}

pub fn residual_normalized(seq: &FrameSequence, alpha: f32) -> Result<ResidualStack, ResidualError> {
    compute_stack(seq, Enhancement::Normalized { alpha })
}

pub fn residual_change_mask(
    seq: &FrameSequence,
    threshold: f32,
) -> Result<ResidualStack, ResidualError> {
    compute_stack(seq, Enhancement::ChangeMask { threshold })
}

pub fn residual_log_scale(seq: &FrameSequence) -> Result<ResidualStack, ResidualError> {
    compute_stack(seq, Enhancement::LogScale)
}

pub fn residual_frequency(seq: &FrameSequence) -> Result<ResidualStack, ResidualError> {
    compute_stack(seq, Enhancement::FrequencyDomain)
}

pub fn residual_optical_flow(
    seq: &FrameSequence,
    block: usize,
    radius: usize,
) -> Result<ResidualStack, ResidualError> {
    compute_stack(seq, Enhancement::OpticalFlow { block, radius })
}

/// `clamp(alpha * |b - a|, 0, 255)` per pixel and channel.
#[inline]
pub fn normalized_value(a: u8, b: u8, alpha: f32) -> f32 {
    (alpha * (b as f32 - a as f32).abs()).clamp(0.0, 255.0)
}

/// `255 * ln(1 + d) / ln(256)`.
#[inline]
pub fn log_scale_value(a: u8, b: u8) -> f32 {
    let d = (b as f64 - a as f64).abs();
    (255.0 * d.ln_1p() / 256f64.ln()) as f32
}

fn normalized_pair(prev: &Frame, next: &Frame, alpha: f32) -> ResidualMap {
    let (h, w, c) = prev.shape();
    let data = prev
        .data()
        .iter()
        .zip(next.data())
        .map(|(&a, &b)| normalized_value(a, b, alpha))
        .collect();
    ResidualMap {
        height: h,
        width: w,
        channels: c,
        data,
    }
}

fn change_mask_pair(prev: &Frame, next: &Frame, threshold: f32) -> ResidualMap {
    let (h, w, c) = prev.shape();
    let data = prev
        .data()
        .chunks_exact(c)
        .zip(next.data().chunks_exact(c))
        .map(|(pa, pb)| {
            let max_diff = pa
                .iter()
                .zip(pb)
                .map(|(&a, &b)| a.abs_diff(b))
                .max()
                .unwrap_or(0);
            if max_diff as f32 > threshold {
                255.0
            } else {
                0.0
            }
        })
        .collect();
    ResidualMap {
        height: h,
        width: w,
        channels: 1,
        data,
    }
}

fn log_scale_pair(prev: &Frame, next: &Frame) -> ResidualMap {
    let (h, w, c) = prev.shape();
    let data = prev
        .data()
        .iter()
        .zip(next.data())
        .map(|(&a, &b)| log_scale_value(a, b))
        .collect();
    ResidualMap {
        height: h,
        width: w,
        channels: c,
        data,
    }
}
