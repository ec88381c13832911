//! Per-residual change statistics and the resulting consistency scores for
//! a decoder clip and a physics clip.
//!
//!     cargo run --example consistency_scores

use mpfscope::consistency::{stack_consistency, DEFAULT_WEIGHT};
use mpfscope::residual::{compute_stack, Enhancement, DEFAULT_ALPHA, DEFAULT_MASK_THRESHOLD};
use mpfscope::synthgen::{Regime, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for regime in [Regime::Decoder, Regime::Physics] {
        let mut cfg = SynthConfig::defaults(regime);
        cfg.count = 1;
        let seq = cfg.generate_all()?.remove(0);
        let stack = compute_stack(&seq, Enhancement::Normalized { alpha: DEFAULT_ALPHA })?;
        let r = stack_consistency(&stack, DEFAULT_MASK_THRESHOLD, DEFAULT_WEIGHT, DEFAULT_WEIGHT)?;

        println!("{}", regime.name());
        println!("   t  change  mask    cx     cy     border center");
        for (t, s) in r.per_frame.iter().enumerate() {
            println!(
                "  {t:>2}  {:.4}  {:.4}  {:.3}  {:.3}  {:.4} {:.4}",
                s.change_ratio, s.mask_density, s.centroid_x, s.centroid_y, s.ratio_border, s.ratio_center
            );
        }
        println!("  c_qty {:.4}  c_spa {:.4}  s_cons {:.4}\n", r.c_qty, r.c_spa, r.s_cons);
    }
    Ok(())
}
