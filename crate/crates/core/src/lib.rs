//! Frame-residual forensics for AI-generated video.
//!
//! Detection runs as a two-stage filter over one contiguous segment of a
//! video:
//!
//! 1. [`sentinel`] averages per-frame logits from an external image backbone
//!    (or the built-in null scorer) and stops early when the mean exceeds a
//!    threshold.
//! 2. [`microscope`] looks at the enhanced inter-frame residuals
//!    ([`residual`]) of the videos that pass, summarises them per residual
//!    and classifies the concatenated descriptors.
//!
//! Frozen generative decoders leave residuals that are confined to a fixed
//! low-dimensional basis and stay statistically stable over time, while
//! physical recordings produce sparse residuals whose amount and location
//! change from frame to frame. [`consistency`] measures that stability and
//! [`synthgen`] simulates both regimes so the whole chain can be exercised
//! without external data.

pub mod consistency;
pub mod error;
pub mod eval;
pub mod microscope;
pub mod pipeline;
pub mod residual;
pub mod sampling;
pub mod sentinel;
pub mod stats;
pub mod synthgen;

#[doc(hidden)]
pub mod cli;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// Provenance of a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "AI", alias = "ai")]
    Ai,
    #[serde(rename = "Real", alias = "real")]
    Real,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Ai => f.pad("AI"),
            Label::Real => f.pad("Real"),
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ai" => Ok(Label::Ai),
            "real" => Ok(Label::Real),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}
