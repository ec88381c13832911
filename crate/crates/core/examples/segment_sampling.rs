//! Writes a 40-frame clip to the raw container, reads it back and cuts
//! fixed and random 8-frame windows out of it.
//!
//!     cargo run --example segment_sampling [out_dir]

use std::path::PathBuf;

use mpfscope::sampling::{
    load_frames, load_source, sample_segment, write_mpfraw, Fps, IngestSpec, SegmentMode,
};
use mpfscope::synthgen::{Regime, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("mpfscope-sampling"), PathBuf::from);
    std::fs::create_dir_all(&dir)?;

    let mut cfg = SynthConfig::defaults(Regime::Physics);
    cfg.length = 40;
    cfg.count = 1;
    let clip = cfg.generate_all()?.remove(0);
    let path = dir.join("clip.mpfraw");
    write_mpfraw(&path, clip.frames(), Fps::new(30000, 1001)?)?;

    let source = load_source(&path, &IngestSpec::default())?;
    let (h, w, c) = source.shape();
    println!("{}: {} frames of {h}x{w}x{c} at {} fps", path.display(), source.len(), source.fps());

    let fixed = load_frames(&path, &IngestSpec::default())?;
    println!("fixed      start {:>2}  len {}", fixed.start_index(), fixed.len());
    for seed in 0..5 {
        let spec = IngestSpec {
            mode: SegmentMode::Stochastic,
            seed,
            ..IngestSpec::default()
        };
        let seg = load_frames(&path, &spec)?;
        println!("seed {seed}     start {:>2}  len {}", seg.start_index(), seg.len());
    }

    // a source shorter than the window is kept whole and flagged
    let four = source.segment(0, 4)?;
    let short = four.segment(sample_segment(four.len(), 8, SegmentMode::Stochastic, 9)?, 8)?;
    println!("short clip len {} short={}", short.len(), short.is_short());
    Ok(())
}
