//! Labelled desk-scale video simulator.
//!
//! Two regimes produce frame sequences with known provenance:
//!
//! * **decoder**: a frozen, compressive decoder projects a smooth latent
//!   walk to pixels. Residuals are linear combinations of a fixed set of
//!   Jacobian columns, so they stay structured and homogeneous over time.
//! * **physics**: a static scene recorded with camera jitter, fresh sensor
//!   noise and a sparse moving object. Residuals vanish where nothing
//!   happens and change character from frame to frame.
//!
//! Corpora are written as `.mpfraw` containers plus a JSON manifest, and are
//! byte-for-byte reproducible from the configuration.

mod decoder;
mod physics;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sampling::{encode_mpfraw, Fps, FrameSequence, SamplingError};
use crate::Label;

pub use decoder::{
    decode_trajectory, generate_decoder_sequence, DecoderModel, LatentTrajectory, Nonlinearity,
};
pub use physics::{generate_physics_sequence, physics_frames, render_scene, BaseScene, PhysicsModel};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "mpfscope-corpus";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("decoder must be compressive (0 < M < N), got M={latent}, N={output}")]
    NotCompressive { latent: usize, output: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("decoder parameters must be finite")]
    NonFinite,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Frames(#[from] SamplingError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {reason}", path.display())]
    Manifest { path: PathBuf, reason: String },
}

impl SynthError {
    pub fn kind(&self) -> &'static str {
        match self {
            SynthError::NotCompressive { .. } => "not_compressive",
            SynthError::ShapeMismatch(_) => "shape_mismatch",
            SynthError::NonFinite => "non_finite",
            SynthError::InvalidParameter(_) => "invalid_parameter",
            SynthError::Frames(_) => "frames",
            SynthError::Io { .. } => "io",
            SynthError::Manifest { .. } => "manifest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Decoder,
    Physics,
}

impl Regime {
    /// Ground-truth label of sequences from this regime.
    pub fn label(&self) -> Label {
        match self {
            Regime::Decoder => Label::Ai,
            Regime::Physics => Label::Real,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Decoder => "decoder",
            Regime::Physics => "physics",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "decoder" => Ok(Regime::Decoder),
            "physics" => Ok(Regime::Physics),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

/// Generator parameters of one regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RegimeParams {
    Decoder {
        latent_dim: usize,
        drift: f64,
        nonlinearity: Nonlinearity,
    },
    Physics {
        jitter_px: u32,
        shot_noise_sigma: f64,
        motion_prob: f64,
        object_size: usize,
    },
}

impl RegimeParams {
    pub fn regime(&self) -> Regime {
        match self {
            RegimeParams::Decoder { .. } => Regime::Decoder,
            RegimeParams::Physics { .. } => Regime::Physics,
        }
    }

    pub fn default_decoder() -> Self {
        RegimeParams::Decoder {
            latent_dim: 16,
            drift: 0.05,
            nonlinearity: Nonlinearity::None,
        }
    }

    pub fn default_physics() -> Self {
        let p = PhysicsModel::default();
        RegimeParams::Physics {
            jitter_px: p.jitter_px,
            shot_noise_sigma: p.shot_noise_sigma,
            motion_prob: p.motion_prob,
            object_size: p.object_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Frames per sequence.
    pub length: usize,
    pub count: usize,
    pub seed: u64,
    pub fps: Fps,
    pub base_scene: BaseScene,
    pub model: RegimeParams,
}

impl SynthConfig {
    /// 64x64x3, 8 frames, 200 sequences.
    pub fn defaults(regime: Regime) -> Self {
        SynthConfig {
            height: 64,
            width: 64,
            channels: 3,
            length: 8,
            count: 200,
            seed: 42,
            fps: Fps::default(),
            base_scene: BaseScene::default(),
            model: match regime {
                Regime::Decoder => RegimeParams::default_decoder(),
                Regime::Physics => RegimeParams::default_physics(),
            },
        }
    }

    pub fn regime(&self) -> Regime {
        self.model.regime()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.count == 0 {
            return Err(SynthError::InvalidParameter("count must be at least 1".into()));
        }
        if self.height == 0 || self.width == 0 || !matches!(self.channels, 1 | 3) {
            return Err(SynthError::ShapeMismatch(format!(
                "unsupported frame shape {}x{}x{}",
                self.height, self.width, self.channels
            )));
        }
        if self.length < 2 {
            return Err(SynthError::InvalidParameter("length must be at least 2".into()));
        }
        Fps::new(self.fps.num, self.fps.den)?;
        match self.model {
            RegimeParams::Decoder {
                latent_dim, drift, ..
            } => {
                let n = self.height * self.width * self.channels;
                if latent_dim == 0 || latent_dim >= n {
                    return Err(SynthError::NotCompressive {
                        latent: latent_dim,
                        output: n,
                    });
                }
                if !(drift >= 0.0 && drift.is_finite()) {
                    return Err(SynthError::InvalidParameter(format!(
                        "drift must be non-negative, got {drift}"
                    )));
                }
            }
            RegimeParams::Physics { .. } => self.physics_model(0).validate()?,
        }
        Ok(())
    }

    /// Seed of sequence `index`.
    pub fn sequence_seed(&self, index: usize) -> u64 {
        let salt = match self.regime() {
            Regime::Decoder => 0xD3C0_DE00,
            Regime::Physics => 0x9B75_1C50,
        };
        splitmix64(self.seed ^ salt ^ splitmix64(index as u64))
    }

    /// The frozen decoder shared by every sequence of this config.
    pub fn decoder_model(&self) -> Result<DecoderModel, SynthError> {
        match self.model {
            RegimeParams::Decoder {
                latent_dim,
                nonlinearity,
                ..
            } => DecoderModel::random(
                self.height * self.width * self.channels,
                latent_dim,
                nonlinearity,
                splitmix64(self.seed),
            ),
            RegimeParams::Physics { .. } => Err(SynthError::InvalidParameter(
                "physics config has no decoder".into(),
            )),
        }
    }

    pub fn physics_model(&self, index: usize) -> PhysicsModel {
        match self.model {
            RegimeParams::Physics {
                jitter_px,
                shot_noise_sigma,
                motion_prob,
                object_size,
            } => PhysicsModel {
                jitter_px,
                shot_noise_sigma,
                motion_prob,
                object_size,
                seed: self.sequence_seed(index),
            },
            RegimeParams::Decoder { .. } => PhysicsModel {
                seed: self.sequence_seed(index),
                ..PhysicsModel::default()
            },
        }
    }

    pub fn trajectory(&self, index: usize) -> Option<LatentTrajectory> {
        match self.model {
            RegimeParams::Decoder {
                latent_dim, drift, ..
            } => Some(LatentTrajectory::random(
                latent_dim,
                drift,
                self.length,
                self.sequence_seed(index),
            )),
            RegimeParams::Physics { .. } => None,
        }
    }

    /// Generates sequence `index`. Pass a decoder from
    /// [`SynthConfig::decoder_model`] to avoid rebuilding it per sequence.
    pub fn generate(
        &self,
        index: usize,
        decoder: Option<&DecoderModel>,
    ) -> Result<FrameSequence, SynthError> {
        match self.model {
            RegimeParams::Decoder { .. } => {
                let owned;
                let model = match decoder {
                    Some(m) => m,
                    None => {
                        owned = self.decoder_model()?;
                        &owned
                    }
                };
                let traj = self.trajectory(index).expect("decoder regime has a trajectory");
                generate_decoder_sequence(model, &traj, self.shape(), self.fps)
            }
            RegimeParams::Physics { .. } => generate_physics_sequence(
                &self.physics_model(index),
                self.base_scene,
                self.shape(),
                self.length,
                self.fps,
            ),
        }
    }

    /// All `count` sequences, in index order.
    pub fn generate_all(&self) -> Result<Vec<FrameSequence>, SynthError> {
        self.validate()?;
        let decoder = match self.regime() {
            Regime::Decoder => Some(self.decoder_model()?),
            Regime::Physics => None,
        };
        (0..self.count)
            .into_par_iter()
            .map(|i| self.generate(i, decoder.as_ref()))
            .collect()
    }
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    /// Path relative to the manifest directory.
    pub file: String,
    pub label: Label,
    /// Grouping key for per-subset reports.
    pub subset: String,
    pub regime: Option<Regime>,
    pub seed: Option<u64>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub frames: usize,
    pub fps: Fps,
    /// Measured bitrate; when absent a raw-size proxy is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitrate_mbps: Option<f64>,
    /// Optional per-frame score file for the frame gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub configs: Vec<SynthConfig>,
    pub entries: Vec<CorpusEntry>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: CorpusManifest =
            serde_json::from_str(&text).map_err(|e| SynthError::Manifest {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(SynthError::Manifest {
                path: path.to_path_buf(),
                reason: format!("unexpected format `{}`", manifest.format),
            });
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| SynthError::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        fs::write(path, text + "\n").map_err(|source| SynthError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Absolute location of an entry's container.
    pub fn resolve(manifest_path: &Path, file: &str) -> PathBuf {
        manifest_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(file)
    }
}

/// SHA-256 over the canonical JSON of the configs.
pub fn config_hash(configs: &[SynthConfig]) -> String {
    let json = serde_json::to_vec(configs).expect("configs serialize");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes one config's corpus into `out`.
pub fn generate_corpus(cfg: &SynthConfig, out: &Path) -> Result<CorpusManifest, SynthError> {
    generate_corpora(std::slice::from_ref(cfg), out)
}

/// Writes several configs into one corpus directory with a merged manifest.
/// Each config becomes its own subset; repeats of a regime are numbered
/// `decoder_1`, `decoder_2`, ...
pub fn generate_corpora(configs: &[SynthConfig], out: &Path) -> Result<CorpusManifest, SynthError> {
    fs::create_dir_all(out).map_err(|source| SynthError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::new();
    let mut seen: HashMap<Regime, usize> = HashMap::new();
    for cfg in configs {
        let regime = cfg.regime();
        let repeat = seen.entry(regime).or_default();
        let subset = match *repeat {
            0 => regime.name().to_string(),
            k => format!("{}_{k}", regime.name()),
        };
        *repeat += 1;
        let sequences = cfg.generate_all()?;
        let encoded = sequences
            .par_iter()
            .map(|seq| encode_mpfraw(seq.frames(), seq.fps()))
            .collect::<Result<Vec<_>, _>>()?;
        for (i, bytes) in encoded.into_iter().enumerate() {
            let id = format!("{subset}_{i:04}");
            let file = format!("{id}.mpfraw");
            let path = out.join(&file);
            fs::write(&path, bytes).map_err(|source| SynthError::Io { path, source })?;
            entries.push(CorpusEntry {
                id,
                file,
                label: regime.label(),
                subset: subset.clone(),
                regime: Some(regime),
                seed: Some(cfg.sequence_seed(i)),
                height: cfg.height,
                width: cfg.width,
                channels: cfg.channels,
                frames: cfg.length,
                fps: cfg.fps,
                bitrate_mbps: None,
                scores: None,
            });
        }
    }
    let manifest = CorpusManifest {
        format: MANIFEST_FORMAT.to_string(),
        version: MANIFEST_VERSION,
        config_hash: config_hash(configs),
        configs: configs.to_vec(),
        entries,
    };
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(regime: Regime) -> SynthConfig {
        SynthConfig {
            height: 16,
            width: 16,
            count: 3,
            ..SynthConfig::defaults(regime)
        }
    }

    #[test]
    fn repeated_regimes_get_distinct_subsets() {
        let dir = tempfile::tempdir().unwrap();
        let mut second = small(Regime::Decoder);
        second.seed += 1;
        let m = generate_corpora(&[small(Regime::Decoder), second, small(Regime::Physics)], dir.path()).unwrap();
        let ids: std::collections::BTreeSet<&str> = m.entries.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids.len(), 9);
        assert_eq!(m.entries[3].id, "decoder_1_0000");
        assert_eq!(m.entries[3].subset, "decoder_1");
        assert_eq!(m.entries[6].subset, "physics");
    }

    #[test]
    fn defaults_validate() {
        SynthConfig::defaults(Regime::Decoder).validate().unwrap();
        SynthConfig::defaults(Regime::Physics).validate().unwrap();
    }

    #[test]
    fn zero_count_rejected() {
        let cfg = SynthConfig {
            count: 0,
            ..small(Regime::Physics)
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sequence_seeds_differ() {
        let cfg = small(Regime::Decoder);
        assert_ne!(cfg.sequence_seed(0), cfg.sequence_seed(1));
        assert_eq!(cfg.sequence_seed(2), cfg.sequence_seed(2));
    }

    #[test]
    fn generation_is_deterministic() {
        for regime in [Regime::Decoder, Regime::Physics] {
            let cfg = small(regime);
            assert_eq!(cfg.generate_all().unwrap(), cfg.generate_all().unwrap());
        }
    }

    #[test]
    fn labels_follow_regime() {
        assert_eq!(Regime::Decoder.label(), Label::Ai);
        assert_eq!(Regime::Physics.label(), Label::Real);
    }

    #[test]
    fn corpus_written_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_corpora(&[small(Regime::Decoder), small(Regime::Physics)], dir.path()).unwrap();
        assert_eq!(m.entries.len(), 6);
        let loaded = CorpusManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded, m);
        for e in &m.entries {
            assert!(dir.path().join(&e.file).is_file());
        }
        assert_eq!(m.config_hash.len(), 64);
    }
}
