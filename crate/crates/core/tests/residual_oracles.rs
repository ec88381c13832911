use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpfscope::consistency::change_stats;
use mpfscope::microscope::{featurize, DESCRIPTOR_LEN};
use mpfscope::residual::{
    block_vectors, compute_stack, residual_change_mask, residual_frequency, residual_log_scale,
    Enhancement,
};
use mpfscope::sampling::{Fps, Frame, FrameSequence};
use mpfscope::sentinel::{aggregate_mean, frame_logits, read_scores, write_scores, ScoreKind, ScoreMatrix};

fn random_frame(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Frame {
    Frame::new(h, w, 3, (0..h * w * 3).map(|_| rng.random()).collect()).unwrap()
}

fn seq(frames: Vec<Frame>) -> FrameSequence {
    FrameSequence::new(frames, Fps::default(), "oracle").unwrap()
}

#[test]
fn change_mask_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_frame(&mut rng, 16, 16);
    let b = random_frame(&mut rng, 16, 16);
    let stack = residual_change_mask(&seq(vec![a.clone(), b.clone()]), 10.0).unwrap();
    let map = &stack.maps()[0];
    for y in 0..16 {
        for x in 0..16 {
            let mut changed = false;
            for c in 0..3 {
                let d = (a.get(y, x, c) as i32 - b.get(y, x, c) as i32).abs();
                if d > 10 {
                    changed = true;
                }
            }
            assert_eq!(map.get(y, x, 0), if changed { 255.0 } else { 0.0 });
        }
    }
}

#[test]
fn log_scale_midpoint() {
    let a = Frame::filled(1, 1, 3, 100);
    let b = Frame::filled(1, 1, 3, 115);
    let v = residual_log_scale(&seq(vec![a, b])).unwrap().maps()[0].data()[0] as f64;
    let want = 255.0 * 16f64.ln() / 256f64.ln();
    assert!((want - 127.5).abs() < 1e-12);
    assert!((v - want).abs() < 1e-4);
}

#[test]
fn frequency_of_identical_frames_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_frame(&mut rng, 8, 8);
    let stack = residual_frequency(&seq(vec![a.clone(), a])).unwrap();
    assert_eq!(stack.maps()[0].channels(), 1);
    assert!(stack.maps()[0].data().iter().all(|&v| v == 0.0));
}

#[test]
fn wrapped_shift_is_found() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (h, w) = (32, 32);
    let a = random_frame(&mut rng, h, w);
    let mut shifted = vec![0u8; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                shifted[(y * w + (x + 2) % w) * 3 + c] = a.get(y, x, c);
            }
        }
    }
    let b = Frame::new(h, w, 3, shifted).unwrap();
    let vectors = block_vectors(&a, &b, 8, 3);
    let interior: Vec<_> = vectors
        .iter()
        .filter(|v| v.x > 0 && v.x + 8 < w && v.y > 0 && v.y + 8 < h)
        .collect();
    assert!(!interior.is_empty());
    assert!(interior.iter().all(|v| (v.dx, v.dy) == (2, 0)));
}

#[test]
fn descriptor_entropy_matches_histogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let frames: Vec<Frame> = (0..4).map(|_| random_frame(&mut rng, 12, 10)).collect();
    let stack = compute_stack(&seq(frames), Enhancement::Normalized { alpha: 1.5 }).unwrap();
    let fv = featurize(&stack);
    assert_eq!(fv.values.len(), 3 * DESCRIPTOR_LEN);
    for (i, map) in stack.maps().iter().enumerate() {
        let values = map.data();
        let mut hist = std::collections::HashMap::new();
        for &v in values {
            *hist.entry(v.round() as i64).or_insert(0usize) += 1;
        }
        let n = values.len() as f64;
        let entropy: f64 = hist.values().map(|&c| -(c as f64 / n) * (c as f64 / n).log2()).sum();
        let m: f64 = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let sd = (values.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / n).sqrt();
        let d = fv.descriptor(i);
        assert!((d[7] - m).abs() < 1e-9);
        assert!((d[8] - sd).abs() < 1e-9);
        assert!((d[9] - entropy).abs() < 1e-9);
        assert!((0.0..=8.0).contains(&d[9]));
        let stats = change_stats(map, 5.0);
        assert_eq!(&d[..7], &stats.as_array());
    }
}

#[test]
fn stats_fields_stay_in_unit_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let frames: Vec<Frame> = (0..2).map(|_| random_frame(&mut rng, 9, 13)).collect();
        let alpha = rng.random_range(0.1..20.0);
        let stack = compute_stack(&seq(frames), Enhancement::Normalized { alpha }).unwrap();
        let s = change_stats(&stack.maps()[0], 5.0);
        assert!(s.as_array().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(s.ratio_border + s.ratio_center <= 1.0 + 1e-9);
    }
}

#[test]
fn score_file_mean_matches_direct_sum() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.mpfs");
    let values = [0.5f32, -1.25, 3.0, 0.125, -0.75, 2.5, 1.0, -0.375];
    write_scores(&path, &ScoreMatrix::new(8, 1, ScoreKind::Logits, values.to_vec()).unwrap()).unwrap();
    let logits = frame_logits(&read_scores(&path).unwrap(), None).unwrap();
    let mut total = 0.0f64;
    for v in values {
        total += v as f64;
    }
    assert_eq!(logits.len(), 8);
    assert!((aggregate_mean(&logits).unwrap() - total / 8.0).abs() < 1e-12);
}
