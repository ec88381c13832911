//! Centered log-magnitude spectrum of the luma difference.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::ResidualMap;
use crate::sampling::Frame;

/// Unnormalized forward 2-D DFT of a row-major `h x w` real array.
pub fn fft2(values: &[f64], h: usize, w: usize) -> Vec<Complex64> {
    assert_eq!(values.len(), h * w, "fft2 input must be h*w");
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();

    let row_fft = planner.plan_fft_forward(w);
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }

    let col_fft = planner.plan_fft_forward(h);
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = buf[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            buf[y * w + x] = column[y];
        }
    }
    buf
}

/// Moves the zero-frequency bin to `(h/2, w/2)`.
pub fn fftshift<T: Copy>(values: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = values.to_vec();
    for y in 0..h {
        let ty = (y + h / 2) % h;
        for x in 0..w {
            let tx = (x + w / 2) % w;
            out[ty * w + tx] = values[y * w + x];
        }
    }
    out
}

/// `ln(1 + |F|)` of the centered spectrum, min-max scaled to `[0, 255]`.
/// A constant spectrum (including the all-zero difference) maps to zeros.
pub fn log_spectrum_map(diff: &[f64], h: usize, w: usize) -> Vec<f32> {
    if diff.iter().all(|&v| v == 0.0) {
        return vec![0.0; h * w];
    }
    let spectrum = fft2(diff, h, w);
    let logmag: Vec<f64> = spectrum.iter().map(|c| c.norm().ln_1p()).collect();
    let centered = fftshift(&logmag, h, w);
    let (lo, hi) = centered
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if span.is_nan() || span <= 0.0 {
        return vec![0.0; h * w];
    }
    centered
        .iter()
        .map(|&v| ((v - lo) / span * 255.0).clamp(0.0, 255.0) as f32)
        .collect()
}

pub(super) fn frequency_pair(prev: &Frame, next: &Frame) -> ResidualMap {
    let (h, w, _) = prev.shape();
    let diff: Vec<f64> = prev
        .luma()
        .into_iter()
        .zip(next.luma())
        .map(|(a, b)| b - a)
        .collect();
    ResidualMap::new(h, w, 1, log_spectrum_map(&diff, h, w)).expect("spectrum map has h*w cells")
}
