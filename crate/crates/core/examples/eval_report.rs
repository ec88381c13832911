//! Evaluates pipeline verdicts per subset against a composite quality
//! score. Subsets differ in resolution and frame rate.
//!
//!     cargo run --release --example eval_report [out_dir]

use std::path::PathBuf;

use mpfscope::eval::{correlation_report, evaluate};
use mpfscope::microscope::{train, TrainConfig};
use mpfscope::pipeline::{
    corpus_features, corpus_inputs, holdout_split, run_batch, subset, PipelineConfig,
};
use mpfscope::sampling::Fps;
use mpfscope::synthgen::{generate_corpora, Regime, SynthConfig, MANIFEST_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("mpfscope-eval"), PathBuf::from);

    let mut configs = Vec::new();
    for (i, (side, fps)) in [(32, 8), (64, 8), (64, 24)].into_iter().enumerate() {
        for regime in [Regime::Decoder, Regime::Physics] {
            configs.push(SynthConfig {
                height: side,
                width: side,
                fps: Fps::new(fps, 1)?,
                count: 30,
                seed: 100 + i as u64,
                ..SynthConfig::defaults(regime)
            });
        }
    }
    let manifest = generate_corpora(&configs, &dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let cfg = PipelineConfig::default();

    // one model per resolution, trained on a third of each subset
    let feats = corpus_features(&manifest_path, &manifest, &cfg)?;
    let inputs = corpus_inputs(&manifest_path, &manifest);
    let mut predictions = Vec::new();
    for side in [32, 64] {
        let idx: Vec<usize> = (0..manifest.entries.len())
            .filter(|&i| manifest.entries[i].height == side)
            .collect();
        let part = subset(&feats.data, &idx);
        let (train_idx, _) = holdout_split(&part.labels, 0.67, 3);
        let (model, _) = train(&subset(&part, &train_idx), &TrainConfig::default())?;
        let these: Vec<_> = idx.iter().map(|&i| inputs[i].clone()).collect();
        predictions.extend(run_batch(&these, &model, None, &cfg, 4, None)?.iter().map(|r| r.prediction()));
    }

    let report = evaluate(&manifest, &predictions)?;
    let o = &report.overall;
    println!("overall accuracy {:.3}  f1 {:.3}  ({} videos)", o.accuracy, o.f1, o.total);
    println!("subset      fps  Mbps     pixels  composite  accuracy");
    for s in &report.subsets {
        if let Some(q) = &s.quality {
            println!(
                "{:<10} {:>4.0} {:>6.2} {:>9.0}  {:>9.3}  {:>8.3}",
                s.subset, q.fps, q.bitrate_mbps, q.resolution_n, q.composite, s.metrics.accuracy
            );
        }
    }
    print!("\n{}", correlation_report(&report.subsets));
    Ok(())
}
