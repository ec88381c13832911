//! Runs every residual enhancement on one decoder clip and one physics clip,
//! then exports the normalized stack as 16-bit PNGs and reads it back.
//!
//!     cargo run --example residual_strategies [out_dir]

use std::path::PathBuf;

use mpfscope::microscope::intensity_summary;
use mpfscope::residual::{compute_stack, read_stack, write_stack, Enhancement, Strategy, MANIFEST_NAME};
use mpfscope::synthgen::{Regime, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("mpfscope-residuals"), PathBuf::from);

    for regime in [Regime::Decoder, Regime::Physics] {
        let mut cfg = SynthConfig::defaults(regime);
        cfg.count = 1;
        let seq = cfg.generate_all()?.remove(0);
        println!("{}", regime.name());
        for strategy in Strategy::ALL {
            let stack = compute_stack(&seq, Enhancement::with_defaults(strategy))?;
            let means: Vec<String> = stack
                .maps()
                .iter()
                .map(|m| format!("{:6.2}", intensity_summary(m).0))
                .collect();
            println!("  {:<10} mean per residual [{}]", strategy.cli_name(), means.join(" "));
        }

        let stack = compute_stack(&seq, Enhancement::with_defaults(Strategy::Normalized))?;
        let out = dir.join(regime.name());
        let manifest = write_stack(&out, &stack)?;
        let (_, back) = read_stack(&out.join(MANIFEST_NAME))?;
        let worst = stack
            .maps()
            .iter()
            .zip(back.maps())
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()))
            .fold(0.0f32, f32::max);
        println!("  wrote {} maps to {}, max round-trip error {worst:.5}", manifest.count, out.display());
    }
    Ok(())
}
