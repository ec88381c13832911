use mpfscope::eval::Confusion;
use mpfscope::microscope::{classify, loss_and_gradient, train, ClassifierModel, Dataset, TrainConfig, DESCRIPTOR_LEN};
use mpfscope::pipeline::{corpus_features, holdout_split, subset, PipelineConfig};
use mpfscope::synthgen::{generate_corpora, CorpusManifest, Regime, SynthConfig};
use mpfscope::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Dataset::default();
    for i in 0..n {
        let label = if i % 2 == 0 { Label::Ai } else { Label::Real };
        let shift = if label == Label::Ai { 0.8 } else { -0.8 };
        let row = (0..dim).map(|j| shift * (j % 2) as f64 + rng.random_range(-1.0..1.0)).collect();
        d.push(row, label);
    }
    d
}

#[test]
fn affine_feature_rescaling_does_not_change_predictions() {
    let data = blobs(60, 5, 1);
    let scale = [3.0, 0.01, 250.0, 1.0, 7.5];
    let offset = [-4.0, 100.0, 0.0, 1e3, 0.5];
    let mut moved = Dataset::default();
    for (row, &l) in data.rows.iter().zip(&data.labels) {
        moved.push(row.iter().enumerate().map(|(j, v)| v * scale[j] + offset[j]).collect(), l);
    }
    let cfg = TrainConfig::default();
    let (a, _) = train(&data, &cfg).unwrap();
    let (b, _) = train(&moved, &cfg).unwrap();
    for (r1, r2) in data.rows.iter().zip(&moved.rows) {
        let p1 = classify(&a, r1).unwrap().probability;
        let p2 = classify(&b, r2).unwrap().probability;
        assert!((p1 - p2).abs() < 1e-9, "{p1} vs {p2}");
    }
}

#[test]
fn saved_model_matches_hand_evaluation() {
    let data = blobs(40, 4, 2);
    let (model, _) = train(&data, &TrainConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();

    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let floats = |k: &str| -> Vec<f64> { v[k].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect() };
    let kept: Vec<usize> = v["kept_dims"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect();
    let (mean, std, w) = (floats("feature_mean"), floats("feature_std"), floats("weights"));
    let bias = v["bias"].as_f64().unwrap();

    let reloaded = ClassifierModel::load(&path).unwrap();
    assert_eq!(reloaded, model);
    for row in &data.rows {
        let z: f64 = kept.iter().enumerate().map(|(k, &j)| w[k] * (row[j] - mean[k]) / std[k]).sum::<f64>() + bias;
        let p = 1.0 / (1.0 + (-z).exp());
        let got = classify(&reloaded, row).unwrap();
        assert!((got.probability - p).abs() < 1e-12);
        assert_eq!(got.verdict == Label::Ai, p > 0.5);
    }
}

#[test]
fn constant_model_survives_a_round_trip() {
    let m = ClassifierModel::constant(7, 0.0);
    let back = ClassifierModel::from_json(&m.to_json()).unwrap();
    assert!(back.train_loss.is_nan());
    let c = classify(&back, &[1.0; 7]).unwrap();
    assert_eq!(c.probability, 0.5);
    assert_eq!(c.verdict, Label::Real);
}

#[test]
fn gradient_matches_finite_differences() {
    let data = blobs(20, 3, 3);
    let targets: Vec<f64> = data.labels.iter().map(|l| f64::from(u8::from(*l == Label::Ai))).collect();
    let params = [0.3, -0.7, 0.1, 0.25];
    let (_, grad) = loss_and_gradient(&params, &data.rows, &targets);
    let h = 1e-6;
    for i in 0..params.len() {
        let mut up = params;
        let mut down = params;
        up[i] += h;
        down[i] -= h;
        let fd = (loss_and_gradient(&up, &data.rows, &targets).0 - loss_and_gradient(&down, &data.rows, &targets).0) / (2.0 * h);
        assert!((fd - grad[i]).abs() < 1e-6, "param {i}: {fd} vs {}", grad[i]);
    }
}

#[test]
fn reversed_residual_order_on_holdout() {
    let dir = tempfile::tempdir().unwrap();
    let configs = [SynthConfig::defaults(Regime::Decoder), SynthConfig::defaults(Regime::Physics)];
    generate_corpora(&configs, dir.path()).unwrap();
    let manifest_path = dir.path().join("manifest.json");
    let manifest = CorpusManifest::load(&manifest_path).unwrap();
    let feats = corpus_features(&manifest_path, &manifest, &PipelineConfig::default()).unwrap();
    let (tr, te) = holdout_split(&feats.data.labels, 0.3, 7);
    let (model, _) = train(&subset(&feats.data, &tr), &TrainConfig::default()).unwrap();

    let test = subset(&feats.data, &te);
    let mut forward = Confusion::default();
    let mut reversed = Confusion::default();
    for (row, &label) in test.rows.iter().zip(&test.labels) {
        forward.add(label, classify(&model, row).unwrap().verdict);
        let flipped: Vec<f64> = row.chunks(DESCRIPTOR_LEN).rev().flatten().copied().collect();
        reversed.add(label, classify(&model, &flipped).unwrap().verdict);
    }
    println!(
        "held-out accuracy forward {:.3}, reversed {:.3}, difference {:+.3}",
        forward.accuracy(),
        reversed.accuracy(),
        reversed.accuracy() - forward.accuracy()
    );
    assert!(forward.accuracy() >= 0.9);
}
