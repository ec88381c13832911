//! Generates a small labelled corpus from both regimes and prints the
//! manifest summary.
//!
//!     cargo run --example synth_corpus [out_dir] [count]

use std::path::PathBuf;

use mpfscope::synthgen::{generate_corpora, Nonlinearity, Regime, RegimeParams, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("mpfscope-corpus"), PathBuf::from);
    let count: usize = args.next().map_or(Ok(10), |s| s.parse())?;

    let mut decoder = SynthConfig::defaults(Regime::Decoder);
    decoder.count = count;
    // the nonlinear decoder is a harder variant of the same regime
    let mut tanh = decoder.clone();
    tanh.seed += 1;
    if let RegimeParams::Decoder { nonlinearity, .. } = &mut tanh.model {
        *nonlinearity = Nonlinearity::TanhHidden;
    }
    let mut physics = SynthConfig::defaults(Regime::Physics);
    physics.count = count;

    let manifest = generate_corpora(&[decoder, tanh, physics], &dir)?;
    println!("{} entries in {}, config hash {}", manifest.entries.len(), dir.display(), manifest.config_hash);
    for e in manifest.entries.iter().step_by(count.max(1)) {
        println!(
            "  {:<20} {:<5} subset {:<10} {}x{}x{} {} frames -> {}",
            e.id, e.label, e.subset, e.height, e.width, e.channels, e.frames, e.file
        );
    }
    Ok(())
}
