//! Full two-stage run over a corpus. A few videos get a score file whose
//! frames look generated, so the gate stops them before any residual work;
//! the rest go through the residual classifier.
//!
//!     cargo run --release --example detection_pipeline [out_dir]

use std::path::PathBuf;

use mpfscope::microscope::{train, TrainConfig};
use mpfscope::pipeline::{
    corpus_features, corpus_inputs, run_batch, PipelineConfig, PipelineTrace, VerdictsFile,
};
use mpfscope::sentinel::{write_scores, ScoreMatrix};
use mpfscope::synthgen::{generate_corpora, CorpusManifest, Regime, SynthConfig, MANIFEST_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("mpfscope-pipeline"), PathBuf::from);

    let configs: Vec<SynthConfig> = [Regime::Decoder, Regime::Physics]
        .into_iter()
        .map(|r| SynthConfig {
            count: 40,
            ..SynthConfig::defaults(r)
        })
        .collect();
    let mut manifest = generate_corpora(&configs, &dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let cfg = PipelineConfig::default();

    // train on the plain corpus, before any score files are attached
    let feats = corpus_features(&manifest_path, &manifest, &cfg)?;
    let (model, _) = train(&feats.data, &TrainConfig::default())?;

    for entry in manifest.entries.iter_mut().step_by(10) {
        let file = format!("{}.mpfs", entry.id);
        write_scores(&dir.join(&file), &ScoreMatrix::logits(vec![2.5; entry.frames])?)?;
        entry.scores = Some(file);
    }
    manifest.save(&manifest_path)?;
    let manifest = CorpusManifest::load(&manifest_path)?;

    let trace = PipelineTrace::new();
    let results = run_batch(&corpus_inputs(&manifest_path, &manifest), &model, None, &cfg, 4, Some(&trace))?;
    let stopped = results.iter().filter(|r| r.stage2.is_none()).count();
    for r in results.iter().step_by(7) {
        let stage2 = r
            .stage2
            .map_or_else(|| "skipped".to_string(), |s| format!("p={:.3}", s.probability));
        println!("  {:<14} s_agg {:>+12.1}  stage2 {:<9} final {}", r.id, r.stage1.s_agg, stage2, r.verdict);
    }
    println!(
        "{} videos, {stopped} stopped at the gate, {} residual maps computed",
        results.len(),
        trace.residual_maps()
    );

    let out = dir.join("verdicts.json");
    std::fs::write(&out, serde_json::to_string_pretty(&VerdictsFile::new(cfg, results))?)?;
    println!("verdicts written to {}", out.display());
    Ok(())
}
