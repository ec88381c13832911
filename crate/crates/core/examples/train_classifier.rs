//! Builds residual features for a synthetic corpus, trains the logistic
//! classifier on a stratified split and scores the held-out part.
//!
//!     cargo run --release --example train_classifier [out_dir] [count]

use std::path::PathBuf;

use mpfscope::eval::Confusion;
use mpfscope::microscope::{classify, train, ClassifierModel, TrainConfig};
use mpfscope::pipeline::{corpus_features, holdout_split, subset, PipelineConfig};
use mpfscope::synthgen::{generate_corpora, CorpusManifest, Regime, SynthConfig, MANIFEST_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("mpfscope-train"), PathBuf::from);
    let count: usize = args.next().map_or(Ok(100), |s| s.parse())?;

    let configs: Vec<SynthConfig> = [Regime::Decoder, Regime::Physics]
        .into_iter()
        .map(|r| SynthConfig {
            count,
            ..SynthConfig::defaults(r)
        })
        .collect();
    generate_corpora(&configs, &dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = CorpusManifest::load(&manifest_path)?;

    let feats = corpus_features(&manifest_path, &manifest, &PipelineConfig::default())?;
    let (train_idx, test_idx) = holdout_split(&feats.data.labels, 0.25, 1);
    let (model, report) = train(&subset(&feats.data, &train_idx), &TrainConfig::default())?;
    println!(
        "trained on {} rows of {} features: loss {:.4} after {} epochs, {} dims kept",
        train_idx.len(),
        feats.data.dim(),
        report.final_loss,
        report.epochs_run,
        model.kept_dims.len()
    );

    let model_path = dir.join("model.json");
    model.save(&model_path)?;
    let model = ClassifierModel::load(&model_path)?;

    let test = subset(&feats.data, &test_idx);
    let mut confusion = Confusion::default();
    for (row, &label) in test.rows.iter().zip(&test.labels) {
        confusion.add(label, classify(&model, row)?.verdict);
    }
    let m = confusion.metrics();
    println!(
        "held-out {}: accuracy {:.3}  precision {:.3}  recall {:.3}  f1 {:.3}",
        test.len(),
        m.accuracy,
        m.precision,
        m.recall,
        m.f1
    );
    println!("model written to {}", model_path.display());
    Ok(())
}
