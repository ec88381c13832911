//! Compares temporal consistency of the two simulated regimes and trains the
//! residual classifier on them.
//!
//!     cargo run --release --example regime_separation [count]

use mpfscope::consistency::default_consistency;
use mpfscope::eval::metrics;
use mpfscope::microscope::{classify, featurize, train, Dataset, TrainConfig};
use mpfscope::pipeline::{holdout_split, subset};
use mpfscope::residual::{compute_stack, Enhancement, DEFAULT_ALPHA};
use mpfscope::stats::{mann_whitney, mean};
use mpfscope::synthgen::{Regime, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: usize = std::env::args().nth(1).map_or(Ok(200), |s| s.parse())?;
    let enhancement = Enhancement::Normalized { alpha: DEFAULT_ALPHA };
    let mut data = Dataset::default();
    let mut scores = Vec::new();
    for regime in [Regime::Decoder, Regime::Physics] {
        let mut cfg = SynthConfig::defaults(regime);
        cfg.count = count;
        let mut qty = Vec::new();
        let mut spa = Vec::new();
        for seq in cfg.generate_all()? {
            let stack = compute_stack(&seq, enhancement)?;
            let c = default_consistency(&stack)?;
            qty.push(c.c_qty);
            spa.push(c.c_spa);
            data.push(featurize(&stack).values, regime.label());
        }
        println!(
            "{:<8} c_qty {:.4}  c_spa {:.4}",
            regime.name(),
            mean(&qty),
            mean(&spa)
        );
        scores.push((qty, spa));
    }
    let (dec, phy) = (&scores[0], &scores[1]);
    println!(
        "gap c_qty {:+.4}  c_spa {:+.4}",
        mean(&dec.0) - mean(&phy.0),
        mean(&dec.1) - mean(&phy.1)
    );
    println!(
        "mann-whitney p  c_qty {:.3e}  c_spa {:.3e}",
        mann_whitney(&dec.0, &phy.0).p_value,
        mann_whitney(&dec.1, &phy.1).p_value
    );

    let (train_idx, test_idx) = holdout_split(&data.labels, 0.2, 7);
    let (model, report) = train(&subset(&data, &train_idx), &TrainConfig::default())?;
    let test = subset(&data, &test_idx);
    let verdicts: Vec<_> = test
        .rows
        .iter()
        .map(|r| classify(&model, r).map(|c| c.verdict))
        .collect::<Result<_, _>>()?;
    let m = metrics(&test.labels, &verdicts)?;
    println!(
        "classifier: loss {:.4} after {} epochs, held-out accuracy {:.3} f1 {:.3}",
        report.final_loss, report.epochs_run, m.accuracy, m.f1
    );
    Ok(())
}
