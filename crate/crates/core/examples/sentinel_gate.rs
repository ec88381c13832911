//! Frame-gate decisions from precomputed score files: raw logits, and
//! embeddings projected through a linear head.
//!
//!     cargo run --example sentinel_gate [out_dir]

use std::path::PathBuf;

use mpfscope::sentinel::{
    aggregate_mean, gate, load_scores, write_scores, LinearHead, ScoreKind, ScoreMatrix,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("mpfscope-sentinel"), PathBuf::from);
    std::fs::create_dir_all(&dir)?;

    let logits = dir.join("logits.mpfs");
    write_scores(&logits, &ScoreMatrix::logits(vec![-1.5, 0.5, 2.0, 1.0, -0.5, 0.8, 1.2, 0.9])?)?;

    // 8 frames x 4-dim embeddings; the head only looks at the first two dims
    let emb: Vec<f32> = (0..8)
        .flat_map(|t| [0.1 * t as f32, -0.2, 3.0, (t % 3) as f32])
        .collect();
    let embeddings = dir.join("embeddings.mpfs");
    write_scores(&embeddings, &ScoreMatrix::new(8, 4, ScoreKind::Embeddings, emb)?)?;
    let head = LinearHead::new(vec![2.0, 1.5, 0.0, 0.0], 0.2)?;

    for (name, path, head) in [("logits", &logits, None), ("embeddings", &embeddings, Some(&head))] {
        let per_frame = load_scores(path, head)?;
        let s_agg = aggregate_mean(&per_frame)?;
        println!("{name}: {} frames, s_agg {s_agg:+.4}", per_frame.len());
        for tau in [-1.0, 0.0, s_agg, 1.0] {
            println!("  tau {tau:+.4} -> {:?}", gate(s_agg, tau).verdict);
        }
    }
    Ok(())
}
