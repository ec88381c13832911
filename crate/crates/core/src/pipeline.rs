//! The two-stage detector: frame gate first, residual classifier on what
//! passes.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Prediction;
use crate::microscope::{classify, featurize_with, ClassifierModel, Dataset, ResidualFeatureVector};
use crate::residual::{compute_stack, Enhancement, DEFAULT_ALPHA, DEFAULT_MASK_THRESHOLD};
use crate::sampling::{load_frames, FrameSequence, IngestSpec, SegmentMode, DEFAULT_SEGMENT_LEN};
use crate::sentinel::{
    run_gate, FrameScorer, GateVerdict, LinearHead, MeanLogits, NullScorer, PrecomputedScorer,
    DEFAULT_TAU,
};
use crate::synthgen::CorpusManifest;
use crate::Label;

pub const VERDICTS_FORMAT: &str = "mpfscope-verdicts";

/// Everything a detection run needs besides the inputs themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub length: usize,
    pub mode: SegmentMode,
    pub seed: u64,
    /// Scale of the normalized residuals fed to the classifier.
    pub alpha: f32,
    /// Change threshold used by the residual descriptors.
    pub threshold: f32,
    pub tau: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            length: DEFAULT_SEGMENT_LEN,
            mode: SegmentMode::Fixed,
            seed: 0,
            alpha: DEFAULT_ALPHA,
            threshold: DEFAULT_MASK_THRESHOLD,
            tau: DEFAULT_TAU,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::Config(format!(
                "segment length must be at least 2, got {}",
                self.length
            )));
        }
        Enhancement::Normalized { alpha: self.alpha }
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(0.0..=255.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must lie in [0, 255], got {}",
                self.threshold
            )));
        }
        if !self.tau.is_finite() {
            return Err(Error::Config(format!("tau must be finite, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn ingest(&self) -> IngestSpec {
        IngestSpec {
            length: self.length,
            mode: self.mode,
            seed: self.seed,
            ..IngestSpec::default()
        }
    }

    pub fn enhancement(&self) -> Enhancement {
        Enhancement::Normalized { alpha: self.alpha }
    }
}

/// Counts residual maps computed through a pipeline, so callers can check
/// that the gate really ended a run early.
#[derive(Debug, Default)]
pub struct PipelineTrace {
    residual_maps: AtomicUsize,
}

impl PipelineTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn residual_maps(&self) -> usize {
        self.residual_maps.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageOne {
    pub s_agg: f64,
    pub verdict: GateVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTwo {
    pub probability: f64,
    pub verdict: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub id: String,
    pub segment_start: usize,
    pub segment_len: usize,
    pub stage1: StageOne,
    pub stage2: Option<StageTwo>,
    #[serde(rename = "final")]
    pub verdict: Label,
}

impl PipelineOutput {
    pub fn prediction(&self) -> Prediction {
        Prediction {
            id: self.id.clone(),
            verdict: self.verdict,
            intercepted: self.stage2.is_none(),
        }
    }
}

/// Normalized residual descriptors of one segment.
pub fn sequence_features(
    seq: &FrameSequence,
    cfg: &PipelineConfig,
    trace: Option<&PipelineTrace>,
) -> Result<ResidualFeatureVector> {
    let stack = compute_stack(seq, cfg.enhancement())?;
    if let Some(t) = trace {
        t.residual_maps.fetch_add(stack.len(), Ordering::Relaxed);
    }
    Ok(featurize_with(&stack, cfg.threshold))
}

/// Runs both stages on an already sampled segment.
pub fn run_on_sequence(
    seq: &FrameSequence,
    scorer: &dyn FrameScorer,
    model: &ClassifierModel,
    cfg: &PipelineConfig,
    trace: Option<&PipelineTrace>,
) -> Result<PipelineOutput> {
    let gate = run_gate(scorer, &MeanLogits, seq, cfg.tau)?;
    let stage1 = StageOne {
        s_agg: gate.s_agg,
        verdict: gate.verdict,
    };
    let (stage2, verdict) = match gate.verdict {
        GateVerdict::OffManifold => (None, Label::Ai),
        GateVerdict::OnManifold => {
            let features = sequence_features(seq, cfg, trace)?;
            let c = classify(model, &features.values)?;
            (
                Some(StageTwo {
                    probability: c.probability,
                    verdict: c.verdict,
                }),
                c.verdict,
            )
        }
    };
    Ok(PipelineOutput {
        id: seq.source_id().to_string(),
        segment_start: seq.start_index(),
        segment_len: seq.len(),
        stage1,
        stage2,
        verdict,
    })
}

/// One video to classify.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineInput {
    pub id: String,
    pub frames: PathBuf,
    /// Per-frame score file; the null scorer is used when absent.
    pub scores: Option<PathBuf>,
}

/// Loads, samples and classifies one video.
pub fn run_pipeline(
    input: &PipelineInput,
    model: &ClassifierModel,
    head: Option<&LinearHead>,
    cfg: &PipelineConfig,
    trace: Option<&PipelineTrace>,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let seq = load_frames(&input.frames, &cfg.ingest())?;
    let mut out = match &input.scores {
        Some(path) => {
            let scorer = PrecomputedScorer::from_file(path, head)?;
            run_on_sequence(&seq, &scorer, model, cfg, trace)?
        }
        None => run_on_sequence(&seq, &NullScorer, model, cfg, trace)?,
    };
    out.id = input.id.clone();
    Ok(out)
}

/// Runs many videos on at most `jobs` threads. Results keep input order.
pub fn run_batch(
    inputs: &[PipelineInput],
    model: &ClassifierModel,
    head: Option<&LinearHead>,
    cfg: &PipelineConfig,
    jobs: usize,
    trace: Option<&PipelineTrace>,
) -> Result<Vec<PipelineOutput>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        inputs
            .par_iter()
            .map(|input| run_pipeline(input, model, head, cfg, trace))
            .collect()
    })
}

/// Pipeline inputs for every entry of a corpus manifest.
pub fn corpus_inputs(manifest_path: &Path, manifest: &CorpusManifest) -> Vec<PipelineInput> {
    manifest
        .entries
        .iter()
        .map(|e| PipelineInput {
            id: e.id.clone(),
            frames: CorpusManifest::resolve(manifest_path, &e.file),
            scores: e
                .scores
                .as_ref()
                .map(|s| CorpusManifest::resolve(manifest_path, s)),
        })
        .collect()
}

/// Feature vectors of labelled corpus entries, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledFeatures {
    pub ids: Vec<String>,
    pub data: Dataset,
}

pub fn corpus_features(
    manifest_path: &Path,
    manifest: &CorpusManifest,
    cfg: &PipelineConfig,
) -> Result<LabelledFeatures> {
    cfg.validate()?;
    let rows = manifest
        .entries
        .par_iter()
        .map(|e| {
            let path = CorpusManifest::resolve(manifest_path, &e.file);
            let seq = load_frames(&path, &cfg.ingest())?;
            Ok(sequence_features(&seq, cfg, None)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Dataset::default();
    for (row, e) in rows.into_iter().zip(&manifest.entries) {
        data.push(row, e.label);
    }
    Ok(LabelledFeatures {
        ids: manifest.entries.iter().map(|e| e.id.clone()).collect(),
        data,
    })
}

/// Stratified shuffle split. Returns (train, held-out) row indices, each
/// sorted; `holdout` is the held-out fraction per class.
pub fn holdout_split(labels: &[Label], holdout: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Label::Ai, Label::Real] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * holdout).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn subset(data: &Dataset, indices: &[usize]) -> Dataset {
    let mut out = Dataset::default();
    for &i in indices {
        out.push(data.rows[i].clone(), data.labels[i]);
    }
    out
}

/// Contents of a verdicts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictsFile {
    pub format: String,
    pub version: u32,
    pub config: PipelineConfig,
    pub results: Vec<PipelineOutput>,
}

impl VerdictsFile {
    pub fn new(config: PipelineConfig, results: Vec<PipelineOutput>) -> Self {
        VerdictsFile {
            format: VERDICTS_FORMAT.to_string(),
            version: 1,
            config,
            results,
        }
    }

    pub fn predictions(&self) -> Vec<Prediction> {
        self.results.iter().map(PipelineOutput::prediction).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: VerdictsFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if file.format != VERDICTS_FORMAT {
            return Err(Error::Config(format!(
                "{}: unexpected format `{}`",
                path.display(),
                file.format
            )));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{Fps, Frame};

    fn seq() -> FrameSequence {
        let frames = (0..8).map(|i| Frame::filled(8, 8, 3, i * 3)).collect();
        FrameSequence::new(frames, Fps::default(), "t").unwrap()
    }

    #[test]
    fn gate_short_circuits() {
        let trace = PipelineTrace::new();
        let model = ClassifierModel::constant(7 * crate::microscope::DESCRIPTOR_LEN, 0.0);
        let scorer = PrecomputedScorer::new(vec![5.0; 8]);
        let out = run_on_sequence(&seq(), &scorer, &model, &PipelineConfig::default(), Some(&trace)).unwrap();
        assert_eq!(out.stage2, None);
        assert_eq!(out.verdict, Label::Ai);
        assert_eq!(trace.residual_maps(), 0);
    }

    #[test]
    fn null_scorer_and_flat_model_give_real() {
        let trace = PipelineTrace::new();
        let model = ClassifierModel::constant(7 * crate::microscope::DESCRIPTOR_LEN, 0.0);
        let out = run_on_sequence(&seq(), &NullScorer, &model, &PipelineConfig::default(), Some(&trace)).unwrap();
        assert_eq!(out.stage2.unwrap().probability, 0.5);
        assert_eq!(out.verdict, Label::Real);
        assert_eq!(trace.residual_maps(), 7);
    }

    #[test]
    fn split_is_stratified() {
        let labels: Vec<Label> = (0..20)
            .map(|i| if i < 10 { Label::Ai } else { Label::Real })
            .collect();
        let (train, test) = holdout_split(&labels, 0.2, 3);
        assert_eq!(test.len(), 4);
        assert_eq!(train.len(), 16);
        assert_eq!(test.iter().filter(|&&i| i < 10).count(), 2);
        assert_eq!(holdout_split(&labels, 0.2, 3), (train, test));
    }
}
