//! Command-line front end.
//!
//! Every flag may also come from `--config <file>` (TOML or JSON, keys spelled
//! like the long flags). A table named after the subcommand is used when
//! present, otherwise the top level. Flags given on the command line win,
//! then the config file, then `MPFSCOPE_SEED` for seeds, then defaults.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::consistency::{stack_consistency, DEFAULT_WEIGHT};
use crate::error::{Error, Result};
use crate::eval::{correlation_report, evaluate, metrics};
use crate::microscope::{classify, train, ClassifierModel, Dataset, TrainConfig};
use crate::pipeline::{
    corpus_features, corpus_inputs, holdout_split, run_batch, run_pipeline, subset,
    PipelineConfig, PipelineInput, VerdictsFile,
};
use crate::residual::{
    compute_stack, read_stack, write_stack, Enhancement, Strategy, DEFAULT_ALPHA,
    DEFAULT_FLOW_BLOCK, DEFAULT_FLOW_RADIUS, DEFAULT_MASK_THRESHOLD, MANIFEST_NAME,
};
use crate::sampling::{
    load_source, sample_segment, write_mpfraw, Fps, IngestSpec, SegmentMode, DEFAULT_SEGMENT_LEN,
};
use crate::sentinel::{gate, read_scores, frame_logits, aggregate_mean, LinearHead, DEFAULT_TAU};
use crate::synthgen::{
    generate_corpora, BaseScene, CorpusManifest, Nonlinearity, Regime, RegimeParams,
    SynthConfig, MANIFEST_FILE,
};
use crate::Label;

pub const SEED_ENV: &str = "MPFSCOPE_SEED";

#[derive(Debug, Parser)]
#[command(name = "mpfscope", version, about = "Frame-residual forensics for AI-generated video")]
struct Cli {
    /// TOML or JSON file supplying any of the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pick a segment from a frame source.
    Sample(SampleArgs),
    /// Compute and export enhanced residual maps.
    Residual(ResidualArgs),
    /// Temporal consistency of an exported residual stack.
    Consistency(ConsistencyArgs),
    /// Generate a labelled synthetic corpus.
    Synth(SynthArgs),
    /// Train the residual classifier on one or more corpora.
    Train(TrainArgs),
    /// Gate per-frame scores, or run the full two-stage detector.
    Detect(DetectArgs),
    /// Score verdicts against a corpus manifest.
    Eval(EvalArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Residual(_) => "residual",
            Command::Consistency(_) => "consistency",
            Command::Synth(_) => "synth",
            Command::Train(_) => "train",
            Command::Detect(_) => "detect",
            Command::Eval(_) => "eval",
        }
    }
}

/// Declares an argument struct whose fields are all optional so command-line
/// values can be layered over config-file values.
macro_rules! layered_args {
    ($name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty,)* }) => {
        #[derive(Debug, Default, Clone, clap::Args, Deserialize)]
        #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
        struct $name {
            $($(#[$fm])* #[arg(long)] $field: Option<$ty>,)*
        }

        impl $name {
            fn layer(self, file: Self) -> Self {
                $name { $($field: self.$field.or(file.$field),)* }
            }
        }
    };
}

layered_args!(SampleArgs {
    /// Image directory or .mpfraw container.
    input: PathBuf,
    length: usize,
    /// fixed or stochastic.
    mode: SegmentMode,
    seed: u64,
    /// Overrides the source frame rate, e.g. 30 or 30000/1001.
    fps: Fps,
    /// Writes the segment as an .mpfraw container.
    out: PathBuf,
});

layered_args!(ResidualArgs {
    input: PathBuf,
    /// normalized, mask, log, freq or flow.
    strategy: Strategy,
    alpha: f32,
    /// Change-mask threshold.
    threshold: f32,
    /// Optical-flow block size.
    block: usize,
    /// Optical-flow search radius.
    radius: usize,
    length: usize,
    mode: SegmentMode,
    seed: u64,
    /// Output directory for the maps and their manifest.
    out: PathBuf,
});

layered_args!(ConsistencyArgs {
    /// Residual manifest, or the directory holding it.
    input: PathBuf,
    w1: f64,
    w2: f64,
    /// Change threshold for the per-residual statistics.
    threshold: f32,
    /// Emit JSON instead of a text summary.
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    json: bool,
});

layered_args!(SynthArgs {
    /// decoder, physics or both.
    regime: String,
    count: usize,
    latent_dim: usize,
    drift: f64,
    /// linear or tanh.
    nonlinearity: String,
    /// Camera jitter in pixels.
    jitter: u32,
    noise_sigma: f64,
    motion_prob: f64,
    object_size: usize,
    /// random-texture, gradient or checkerboard.
    scene: BaseScene,
    height: usize,
    width: usize,
    channels: usize,
    length: usize,
    fps: Fps,
    seed: u64,
    out: PathBuf,
});

layered_args!(TrainArgs {
    /// Corpus manifest; repeat to merge several corpora.
    #[arg(action = clap::ArgAction::Append)]
    corpus: Vec<PathBuf>,
    /// Model file to write.
    out: PathBuf,
    epochs: usize,
    lr: f64,
    seed: u64,
    /// Fraction of each class held out for evaluation.
    holdout: f64,
    alpha: f32,
    threshold: f32,
    length: usize,
    mode: SegmentMode,
});

layered_args!(DetectArgs {
    /// Per-frame score file (.mpfs).
    scores: PathBuf,
    /// Linear head for embedding score files.
    head: PathBuf,
    tau: f64,
    /// Run the residual stage as well.
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    pipeline: bool,
    /// Image directory or .mpfraw container of one video.
    frames: PathBuf,
    /// Corpus manifest; runs the pipeline on every entry.
    corpus: PathBuf,
    model: PathBuf,
    jobs: usize,
    /// Writes the JSON result here as well as to stdout.
    out: PathBuf,
    alpha: f32,
    threshold: f32,
    length: usize,
    mode: SegmentMode,
    seed: u64,
});

layered_args!(EvalArgs {
    /// Verdicts file written by `detect --corpus`.
    pred: PathBuf,
    /// Corpus manifest with ground-truth labels.
    truth: PathBuf,
    report: PathBuf,
    csv: PathBuf,
});

/// Parses arguments, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(json) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(json.as_bytes());
            0
        }
        Err(e) => {
            let report = serde_json::json!({
                "error": { "code": e.code(), "message": e.to_string() }
            });
            eprintln!("{report}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<String> {
    let file = match &cli.config {
        Some(path) => Some(load_config(path, cli.command.name())?),
        None => None,
    };
    match cli.command {
        Command::Sample(a) => cmd_sample(a.layer(from_config(file)?)),
        Command::Residual(a) => cmd_residual(a.layer(from_config(file)?)),
        Command::Consistency(a) => cmd_consistency(a.layer(from_config(file)?)),
        Command::Synth(a) => cmd_synth(a.layer(from_config(file)?)),
        Command::Train(a) => cmd_train(a.layer(from_config(file)?)),
        Command::Detect(a) => cmd_detect(a.layer(from_config(file)?)),
        Command::Eval(a) => cmd_eval(a.layer(from_config(file)?)),
    }
}

fn load_config(path: &Path, section: &str) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value: serde_json::Value = if is_json {
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    } else {
        let table: toml::Table = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(table).map_err(|e| Error::Config(e.to_string()))?
    };
    match value.get(section) {
        Some(v) if v.is_object() => Ok(v.clone()),
        _ => Ok(value),
    }
}

fn from_config<T: Default + for<'de> Deserialize<'de>>(value: Option<serde_json::Value>) -> Result<T> {
    match value {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v).map_err(|e| Error::Config(format!("config file: {e}"))),
    }
}

fn resolve_seed(flag: Option<u64>, default: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV} is not an unsigned integer: `{v}`"))),
        Err(_) => Ok(default),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required option --{flag}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable output") + "\n"
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SampleReport {
    source: String,
    source_len: usize,
    start: usize,
    length: usize,
    short: bool,
    height: usize,
    width: usize,
    channels: usize,
    fps: Fps,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
}

fn cmd_sample(a: SampleArgs) -> Result<String> {
    let input = required(a.input, "input")?;
    let spec = IngestSpec {
        fps: a.fps,
        length: a.length.unwrap_or(DEFAULT_SEGMENT_LEN),
        mode: a.mode.unwrap_or_default(),
        seed: resolve_seed(a.seed, 0)?,
        ..IngestSpec::default()
    };
    let source = load_source(&input, &spec)?;
    let start = sample_segment(source.len(), spec.length, spec.mode, spec.seed)?;
    let seg = source.segment(start, spec.length)?;
    if let Some(out) = &a.out {
        write_mpfraw(out, seg.frames(), seg.fps())?;
    }
    let (height, width, channels) = seg.shape();
    Ok(to_json(&SampleReport {
        source: input.display().to_string(),
        source_len: source.len(),
        start,
        length: seg.len(),
        short: seg.is_short(),
        height,
        width,
        channels,
        fps: seg.fps(),
        out: a.out.map(|p| p.display().to_string()),
    }))
}

fn cmd_residual(a: ResidualArgs) -> Result<String> {
    let input = required(a.input, "input")?;
    let out = required(a.out, "out")?;
    let enhancement = match a.strategy.unwrap_or(Strategy::Normalized) {
        Strategy::Normalized => Enhancement::Normalized {
            alpha: a.alpha.unwrap_or(DEFAULT_ALPHA),
        },
        Strategy::ChangeMask => Enhancement::ChangeMask {
            threshold: a.threshold.unwrap_or(DEFAULT_MASK_THRESHOLD),
        },
        Strategy::LogScale => Enhancement::LogScale,
        Strategy::FrequencyDomain => Enhancement::FrequencyDomain,
        Strategy::OpticalFlow => Enhancement::OpticalFlow {
            block: a.block.unwrap_or(DEFAULT_FLOW_BLOCK),
            radius: a.radius.unwrap_or(DEFAULT_FLOW_RADIUS),
        },
    };
    enhancement
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    let spec = IngestSpec {
        length: a.length.unwrap_or(DEFAULT_SEGMENT_LEN),
        mode: a.mode.unwrap_or_default(),
        seed: resolve_seed(a.seed, 0)?,
        ..IngestSpec::default()
    };
    let seq = crate::sampling::load_frames(&input, &spec)?;
    let stack = compute_stack(&seq, enhancement)?;
    let manifest = write_stack(&out, &stack)?;
    Ok(to_json(&manifest))
}

fn cmd_consistency(a: ConsistencyArgs) -> Result<String> {
    let mut input = required(a.input, "input")?;
    if input.is_dir() {
        input = input.join(MANIFEST_NAME);
    }
    let (_, stack) = read_stack(&input)?;
    let result = stack_consistency(
        &stack,
        a.threshold.unwrap_or(DEFAULT_MASK_THRESHOLD),
        a.w1.unwrap_or(DEFAULT_WEIGHT),
        a.w2.unwrap_or(DEFAULT_WEIGHT),
    )?;
    if a.json.unwrap_or(false) {
        Ok(to_json(&result))
    } else {
        Ok(format!(
            "c_qty  {:.6}\nc_spa  {:.6}\ns_cons {:.6}\nresiduals {}\n",
            result.c_qty,
            result.c_spa,
            result.s_cons,
            result.per_frame.len()
        ))
    }
}

fn synth_config(a: &SynthArgs, regime: Regime) -> Result<SynthConfig> {
    let mut cfg = SynthConfig::defaults(regime);
    cfg.count = a.count.unwrap_or(cfg.count);
    cfg.height = a.height.unwrap_or(cfg.height);
    cfg.width = a.width.unwrap_or(cfg.width);
    cfg.channels = a.channels.unwrap_or(cfg.channels);
    cfg.length = a.length.unwrap_or(cfg.length);
    cfg.fps = a.fps.unwrap_or(cfg.fps);
    cfg.base_scene = a.scene.unwrap_or(cfg.base_scene);
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    cfg.model = match cfg.model {
        RegimeParams::Decoder {
            latent_dim,
            drift,
            nonlinearity,
        } => RegimeParams::Decoder {
            latent_dim: a.latent_dim.unwrap_or(latent_dim),
            drift: a.drift.unwrap_or(drift),
            nonlinearity: match a.nonlinearity.as_deref() {
                None => nonlinearity,
                Some("linear" | "none") => Nonlinearity::None,
                Some("tanh" | "tanh_hidden") => Nonlinearity::TanhHidden,
                Some(other) => {
                    return Err(Error::Config(format!("unknown nonlinearity `{other}`")))
                }
            },
        },
        RegimeParams::Physics {
            jitter_px,
            shot_noise_sigma,
            motion_prob,
            object_size,
        } => RegimeParams::Physics {
            jitter_px: a.jitter.unwrap_or(jitter_px),
            shot_noise_sigma: a.noise_sigma.unwrap_or(shot_noise_sigma),
            motion_prob: a.motion_prob.unwrap_or(motion_prob),
            object_size: a.object_size.unwrap_or(object_size),
        },
    };
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}

#[derive(Serialize)]
struct SynthReport {
    manifest: String,
    config_hash: String,
    entries: usize,
}

fn cmd_synth(a: SynthArgs) -> Result<String> {
    let out = required(a.out.clone(), "out")?;
    let regimes = match a.regime.as_deref().unwrap_or("both") {
        "both" => vec![Regime::Decoder, Regime::Physics],
        other => vec![other.parse::<Regime>().map_err(Error::Config)?],
    };
    let configs = regimes
        .into_iter()
        .map(|r| synth_config(&a, r))
        .collect::<Result<Vec<_>>>()?;
    let manifest = generate_corpora(&configs, &out)?;
    Ok(to_json(&SynthReport {
        manifest: out.join(MANIFEST_FILE).display().to_string(),
        config_hash: manifest.config_hash,
        entries: manifest.entries.len(),
    }))
}

#[derive(Serialize)]
struct TrainSummary {
    model: String,
    train_samples: usize,
    holdout_samples: usize,
    final_loss: f64,
    epochs_run: usize,
    kept_dims: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout: Option<crate::eval::Metrics>,
}

fn cmd_train(a: TrainArgs) -> Result<String> {
    let corpora = a.corpus.filter(|c| !c.is_empty());
    let corpora = required(corpora, "corpus")?;
    let out = required(a.out, "out")?;
    let holdout = a.holdout.unwrap_or(0.0);
    if !(0.0..1.0).contains(&holdout) {
        return Err(Error::Config(format!("holdout must lie in [0, 1), got {holdout}")));
    }
    let seed = resolve_seed(a.seed, 0)?;
    let pcfg = PipelineConfig {
        length: a.length.unwrap_or(DEFAULT_SEGMENT_LEN),
        mode: a.mode.unwrap_or_default(),
        seed,
        alpha: a.alpha.unwrap_or(DEFAULT_ALPHA),
        threshold: a.threshold.unwrap_or(DEFAULT_MASK_THRESHOLD),
        tau: DEFAULT_TAU,
    };
    let tcfg = TrainConfig {
        epochs: a.epochs.unwrap_or(TrainConfig::default().epochs),
        learning_rate: a.lr.unwrap_or(TrainConfig::default().learning_rate),
        seed,
        ..TrainConfig::default()
    };
    let mut data = Dataset::default();
    for path in &corpora {
        let manifest = CorpusManifest::load(path)?;
        let features = corpus_features(path, &manifest, &pcfg)?;
        for (row, label) in features.data.rows.into_iter().zip(features.data.labels) {
            data.push(row, label);
        }
    }
    let (train_idx, test_idx) = holdout_split(&data.labels, holdout, seed);
    let (model, report) = train(&subset(&data, &train_idx), &tcfg)?;
    model.save(&out)?;
    let holdout_metrics = if test_idx.is_empty() {
        None
    } else {
        let test = subset(&data, &test_idx);
        let verdicts = test
            .rows
            .iter()
            .map(|r| classify(&model, r).map(|c| c.verdict))
            .collect::<std::result::Result<Vec<Label>, _>>()?;
        Some(metrics(&test.labels, &verdicts)?)
    };
    Ok(to_json(&TrainSummary {
        model: out.display().to_string(),
        train_samples: train_idx.len(),
        holdout_samples: test_idx.len(),
        final_loss: report.final_loss,
        epochs_run: report.epochs_run,
        kept_dims: model.kept_dims.len(),
        holdout: holdout_metrics,
    }))
}

#[derive(Serialize)]
struct GateReport {
    frames: usize,
    s_agg: f64,
    tau: f64,
    verdict: crate::sentinel::GateVerdict,
}

fn cmd_detect(a: DetectArgs) -> Result<String> {
    let tau = a.tau.unwrap_or(DEFAULT_TAU);
    let head = a.head.as_deref().map(LinearHead::load).transpose()?;
    let full = a.pipeline.unwrap_or(false) || a.corpus.is_some() || a.frames.is_some();
    if !full {
        let scores = required(a.scores, "scores")?;
        let logits = frame_logits(&read_scores(&scores)?, head.as_ref())?;
        let d = gate(aggregate_mean(&logits)?, tau);
        let json = to_json(&GateReport {
            frames: logits.len(),
            s_agg: d.s_agg,
            tau: d.tau,
            verdict: d.verdict,
        });
        if let Some(out) = &a.out {
            write_text(out, &json)?;
        }
        return Ok(json);
    }

    let model = ClassifierModel::load(&required(a.model, "model")?)?;
    let cfg = PipelineConfig {
        length: a.length.unwrap_or(DEFAULT_SEGMENT_LEN),
        mode: a.mode.unwrap_or_default(),
        seed: resolve_seed(a.seed, 0)?,
        alpha: a.alpha.unwrap_or(DEFAULT_ALPHA),
        threshold: a.threshold.unwrap_or(DEFAULT_MASK_THRESHOLD),
        tau,
    };
    cfg.validate()?;
    let json = match (&a.corpus, &a.frames) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("--corpus and --frames are mutually exclusive".into()))
        }
        (Some(manifest_path), None) => {
            if a.scores.is_some() {
                return Err(Error::Config(
                    "--scores applies to a single video; list score files in the manifest".into(),
                ));
            }
            let manifest = CorpusManifest::load(manifest_path)?;
            let inputs = corpus_inputs(manifest_path, &manifest);
            let jobs = a.jobs.unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            });
            let results = run_batch(&inputs, &model, head.as_ref(), &cfg, jobs, None)?;
            to_json(&VerdictsFile::new(cfg, results))
        }
        (None, Some(frames)) => {
            let id = frames
                .file_stem()
                .map_or_else(|| frames.display().to_string(), |s| s.to_string_lossy().into_owned());
            let input = PipelineInput {
                id,
                frames: frames.clone(),
                scores: a.scores.clone(),
            };
            to_json(&run_pipeline(&input, &model, head.as_ref(), &cfg, None)?)
        }
        (None, None) => return Err(Error::Config("--pipeline needs --frames or --corpus".into())),
    };
    if let Some(out) = &a.out {
        write_text(out, &json)?;
    }
    Ok(json)
}

fn cmd_eval(a: EvalArgs) -> Result<String> {
    let verdicts = VerdictsFile::load(&required(a.pred, "pred")?)?;
    let manifest = CorpusManifest::load(&required(a.truth, "truth")?)?;
    let report = evaluate(&manifest, &verdicts.predictions())?;
    let json = to_json(&report);
    if let Some(path) = &a.report {
        write_text(path, &json)?;
    }
    if let Some(path) = &a.csv {
        write_text(path, &correlation_report(&report.subsets))?;
    }
    Ok(json)
}
