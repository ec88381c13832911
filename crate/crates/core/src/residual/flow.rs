//! Exhaustive block-matching motion field.
//!
//! The matching cost of a displacement `d` for block `B` is
//! `SAD(next[B], prev[B - d]) + SAD(prev[B], next[B + d])`, so swapping the
//! two frames turns the optimum into `-d` and leaves magnitudes unchanged.
//! Reference pixels outside the frame are clamped to the nearest edge.

use super::ResidualMap;
use crate::sampling::Frame;

/// Displacement found for one block, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockVector {
    /// Top-left corner of the block.
    pub y: usize,
    pub x: usize,
    pub dx: i32,
    pub dy: i32,
}

impl BlockVector {
    pub fn magnitude(&self) -> f64 {
        ((self.dx * self.dx + self.dy * self.dy) as f64).sqrt()
    }
}

#[inline]
fn clamped(frame: &Frame, y: i64, x: i64, c: usize) -> i32 {
    let yy = y.clamp(0, frame.height() as i64 - 1) as usize;
    let xx = x.clamp(0, frame.width() as i64 - 1) as usize;
    frame.get(yy, xx, c) as i32
}

#[allow(clippy::too_many_arguments)]
fn sad(
    cur: &Frame,
    reference: &Frame,
    y0: usize,
    x0: usize,
    bh: usize,
    bw: usize,
    dy: i32,
    dx: i32,
) -> u64 {
    let c = cur.channels();
    let mut total = 0u64;
    for y in y0..y0 + bh {
        for x in x0..x0 + bw {
            let ry = y as i64 - dy as i64;
            let rx = x as i64 - dx as i64;
            for ch in 0..c {
                total += (cur.get(y, x, ch) as i32 - clamped(reference, ry, rx, ch)).unsigned_abs()
                    as u64;
            }
        }
    }
    total
}

/// Best displacement per block, scanning blocks in row-major order. Edge
/// blocks are truncated to the frame.
pub fn block_vectors(prev: &Frame, next: &Frame, block: usize, radius: usize) -> Vec<BlockVector> {
    assert!(block > 0, "block size must be positive");
    let (h, w, _) = prev.shape();
    let r = radius as i32;
    let mut out = Vec::new();
    for y0 in (0..h).step_by(block) {
        let bh = block.min(h - y0);
        for x0 in (0..w).step_by(block) {
            let bw = block.min(w - x0);
            let mut best: Option<((u64, i32, i32, i32), BlockVector)> = None;
            for dy in -r..=r {
                for dx in -r..=r {
                    let cost = sad(next, prev, y0, x0, bh, bw, dy, dx)
                        + sad(prev, next, y0, x0, bh, bw, -dy, -dx);
                    let key = (cost, dx * dx + dy * dy, dy, dx);
                    if best.as_ref().is_none_or(|(k, _)| key < *k) {
                        best = Some((key, BlockVector { y: y0, x: x0, dx, dy }));
                    }
                }
            }
            out.push(best.expect("search window is never empty").1);
        }
    }
    out
}

/// Flow magnitude per block, upsampled to `H x W`, with `radius * sqrt(2)`
/// mapped to 255. A zero radius gives an all-zero map.
pub fn block_flow(prev: &Frame, next: &Frame, block: usize, radius: usize) -> ResidualMap {
    let (h, w, _) = prev.shape();
    if radius == 0 {
        return ResidualMap::zeros(h, w, 1);
    }
    let scale = 255.0 / (radius as f64 * std::f64::consts::SQRT_2);
    let mut data = vec![0.0f32; h * w];
    for v in block_vectors(prev, next, block, radius) {
        let value = (v.magnitude() * scale).min(255.0) as f32;
        for y in v.y..(v.y + block).min(h) {
            for x in v.x..(v.x + block).min(w) {
                data[y * w + x] = value;
            }
        }
    }
    ResidualMap::new(h, w, 1, data).expect("flow map has h*w cells")
}
