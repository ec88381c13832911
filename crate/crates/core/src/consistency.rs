//! Per-residual change statistics and the temporal consistency score.
//!
//! Quantity consistency:
//! `c_qty = 1 / (1 + σ(change_ratio) + σ(mask_density))`
//!
//! Spatial consistency:
//! `c_spa = 1 / (1 + σ(centroid_x) + σ(centroid_y) + σ(ratio_border) + σ(ratio_center))`
//!
//! and `s_cons = w1 * c_qty + w2 * c_spa`, with σ the population standard
//! deviation over the residuals of one segment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::residual::{ResidualMap, ResidualStack, DEFAULT_MASK_THRESHOLD};
use crate::stats::population_std;

pub const DEFAULT_WEIGHT: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ConsistencyError {
    #[error("consistency needs at least 2 residual statistics, got {0}")]
    TooFewStats(usize),
    #[error("weights must be non-negative and finite, got w1={w1}, w2={w2}")]
    InvalidWeights { w1: f64, w2: f64 },
    #[error("region layout invalid: border margin {border} with center fraction {center}")]
    InvalidRegions { border: f64, center: f64 },
}

impl ConsistencyError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConsistencyError::TooFewStats(_) => "too_few_stats",
            ConsistencyError::InvalidWeights { .. } => "invalid_weights",
            ConsistencyError::InvalidRegions { .. } => "invalid_regions",
        }
    }
}

/// Border band and central box, as fractions of the frame side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionLayout {
    /// Width of the band on each side counted as border.
    pub border_margin: f64,
    /// Side of the centered box counted as center.
    pub center_fraction: f64,
}

impl Default for RegionLayout {
    fn default() -> Self {
        RegionLayout {
            border_margin: 0.125,
            center_fraction: 0.5,
        }
    }
}

impl RegionLayout {
    pub fn validate(&self) -> Result<(), ConsistencyError> {
        let b = self.border_margin;
        let c = self.center_fraction;
        let ok = (0.0..0.5).contains(&b) && c > 0.0 && c <= 1.0 && b <= (1.0 - c) / 2.0;
        if ok {
            Ok(())
        } else {
            Err(ConsistencyError::InvalidRegions {
                border: b,
                center: c,
            })
        }
    }

    fn is_border(&self, u: f64) -> bool {
        u < self.border_margin || u > 1.0 - self.border_margin
    }

    fn is_center(&self, u: f64) -> bool {
        let lo = 0.5 - self.center_fraction / 2.0;
        let hi = 0.5 + self.center_fraction / 2.0;
        (lo..=hi).contains(&u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeStats {
    /// Fraction of map values (pixel x channel) above the threshold.
    pub change_ratio: f64,
    /// Mean of the per-pixel binary change mask, scaled to [0, 1].
    pub mask_density: f64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub ratio_border: f64,
    pub ratio_center: f64,
    /// Mass-weighted RMS distance from the centroid, divided by `sqrt(0.5)`.
    pub spread: f64,
}

impl ChangeStats {
    pub const FIELD_COUNT: usize = 7;

    pub fn as_array(&self) -> [f64; Self::FIELD_COUNT] {
        [
            self.change_ratio,
            self.mask_density,
            self.centroid_x,
            self.centroid_y,
            self.ratio_border,
            self.ratio_center,
            self.spread,
        ]
    }
}

pub fn change_stats(map: &ResidualMap, mask_threshold: f32) -> ChangeStats {
    change_stats_with(map, mask_threshold, &RegionLayout::default())
}

/// Statistics of one residual map. Positions use pixel centers,
/// `u = (x + 0.5) / W`. An all-zero map yields zero ratios and the
/// centroid `(0.5, 0.5)`.
pub fn change_stats_with(map: &ResidualMap, mask_threshold: f32, layout: &RegionLayout) -> ChangeStats {
    let (h, w, c) = map.shape();
    let data = map.data();
    let n_values = data.len().max(1) as f64;
    let n_pixels = (h * w).max(1) as f64;

    let changed_values = data.iter().filter(|&&v| v > mask_threshold).count();
    let changed_pixels = data
        .chunks_exact(c)
        .filter(|px| px.iter().any(|&v| v > mask_threshold))
        .count();

    let mut mass = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut border = 0.0;
    let mut center = 0.0;
    let xs: Vec<f64> = (0..w).map(|x| (x as f64 + 0.5) / w as f64).collect();
    let ys: Vec<f64> = (0..h).map(|y| (y as f64 + 0.5) / h as f64).collect();
    let pixel_mass = map.pixel_mass();
    for (y, &v) in ys.iter().enumerate() {
        let row_border = layout.is_border(v);
        let row_center = layout.is_center(v);
        for (x, &u) in xs.iter().enumerate() {
            let m = pixel_mass[y * w + x];
            if m == 0.0 {
                continue;
            }
            mass += m;
            sx += m * u;
            sy += m * v;
            if row_border || layout.is_border(u) {
                border += m;
            } else if row_center && layout.is_center(u) {
                center += m;
            }
        }
    }

    if mass <= 0.0 {
        return ChangeStats {
            change_ratio: changed_values as f64 / n_values,
            mask_density: changed_pixels as f64 / n_pixels,
            centroid_x: 0.5,
            centroid_y: 0.5,
            ratio_border: 0.0,
            ratio_center: 0.0,
            spread: 0.0,
        };
    }

    let cx = sx / mass;
    let cy = sy / mass;
    let mut second = 0.0;
    for (y, &v) in ys.iter().enumerate() {
        for (x, &u) in xs.iter().enumerate() {
            let m = pixel_mass[y * w + x];
            if m != 0.0 {
                second += m * ((u - cx).powi(2) + (v - cy).powi(2));
            }
        }
    }
    let spread = ((second / mass).sqrt() / 0.5f64.sqrt()).clamp(0.0, 1.0);

    ChangeStats {
        change_ratio: changed_values as f64 / n_values,
        mask_density: changed_pixels as f64 / n_pixels,
        centroid_x: cx.clamp(0.0, 1.0),
        centroid_y: cy.clamp(0.0, 1.0),
        ratio_border: (border / mass).clamp(0.0, 1.0),
        ratio_center: (center / mass).clamp(0.0, 1.0),
        spread,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyScore {
    pub c_qty: f64,
    pub c_spa: f64,
    pub s_cons: f64,
    pub w1: f64,
    pub w2: f64,
}

pub fn consistency_score(
    stats: &[ChangeStats],
    w1: f64,
    w2: f64,
) -> Result<ConsistencyScore, ConsistencyError> {
    if stats.len() < 2 {
        return Err(ConsistencyError::TooFewStats(stats.len()));
    }
    if !(w1 >= 0.0 && w2 >= 0.0 && w1.is_finite() && w2.is_finite()) {
        return Err(ConsistencyError::InvalidWeights { w1, w2 });
    }
    let sigma = |f: fn(&ChangeStats) -> f64| {
        let values: Vec<f64> = stats.iter().map(f).collect();
        population_std(&values)
    };
    let c_qty = 1.0 / (1.0 + sigma(|s| s.change_ratio) + sigma(|s| s.mask_density));
    let c_spa = 1.0
        / (1.0
            + sigma(|s| s.centroid_x)
            + sigma(|s| s.centroid_y)
            + sigma(|s| s.ratio_border)
            + sigma(|s| s.ratio_center));
    Ok(ConsistencyScore {
        c_qty,
        c_spa,
        s_cons: w1 * c_qty + w2 * c_spa,
        w1,
        w2,
    })
}

/// Per-residual statistics and the resulting score for a whole stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConsistency {
    pub c_qty: f64,
    pub c_spa: f64,
    pub s_cons: f64,
    pub per_frame: Vec<ChangeStats>,
}

pub fn stack_consistency(
    stack: &ResidualStack,
    mask_threshold: f32,
    w1: f64,
    w2: f64,
) -> Result<StackConsistency, ConsistencyError> {
    let per_frame: Vec<ChangeStats> = stack
        .maps()
        .iter()
        .map(|m| change_stats(m, mask_threshold))
        .collect();
    let score = consistency_score(&per_frame, w1, w2)?;
    Ok(StackConsistency {
        c_qty: score.c_qty,
        c_spa: score.c_spa,
        s_cons: score.s_cons,
        per_frame,
    })
}

/// Score with the default threshold and equal weights.
pub fn default_consistency(stack: &ResidualStack) -> Result<ConsistencyScore, ConsistencyError> {
    let stats: Vec<ChangeStats> = stack
        .maps()
        .iter()
        .map(|m| change_stats(m, DEFAULT_MASK_THRESHOLD))
        .collect();
    consistency_score(&stats, DEFAULT_WEIGHT, DEFAULT_WEIGHT)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_with_ratio(r: f64) -> ChangeStats {
        ChangeStats {
            change_ratio: r,
            mask_density: 0.4,
            centroid_x: 0.5,
            centroid_y: 0.5,
            ratio_border: 0.3,
            ratio_center: 0.2,
            spread: 0.4,
        }
    }

    #[test]
    fn zero_map_defaults() {
        let s = change_stats(&ResidualMap::zeros(8, 8, 3), 5.0);
        assert_eq!(s.change_ratio, 0.0);
        assert_eq!(s.mask_density, 0.0);
        assert_eq!((s.centroid_x, s.centroid_y), (0.5, 0.5));
        assert_eq!((s.ratio_border, s.ratio_center), (0.0, 0.0));
    }

    #[test]
    fn corner_pixel_centroid() {
        let mut data = vec![0.0; 64];
        data[0] = 100.0;
        let s = change_stats(&ResidualMap::new(8, 8, 1, data).unwrap(), 5.0);
        assert_eq!((s.centroid_x, s.centroid_y), (0.0625, 0.0625));
        assert_eq!(s.ratio_border, 1.0);
        assert_eq!(s.ratio_center, 0.0);
        assert_eq!(s.spread, 0.0);
        assert_eq!(s.change_ratio, 1.0 / 64.0);
    }

    #[test]
    fn uniform_map_regions() {
        let s = change_stats(&ResidualMap::new(8, 8, 3, vec![40.0; 192]).unwrap(), 5.0);
        assert!((s.centroid_x - 0.5).abs() < 1e-12);
        assert!((s.centroid_y - 0.5).abs() < 1e-12);
        assert!((s.ratio_center - 0.25).abs() < 1e-12);
        assert!((s.ratio_border - 28.0 / 64.0).abs() < 1e-12);
        assert_eq!(s.change_ratio, 1.0);
        assert_eq!(s.mask_density, 1.0);
    }

    #[test]
    fn change_ratio_counts_channels_mask_counts_pixels() {
        // one pixel with only its red channel above threshold
        let mut data = vec![0.0; 4 * 3];
        data[0] = 50.0;
        let s = change_stats(&ResidualMap::new(2, 2, 3, data).unwrap(), 5.0);
        assert_eq!(s.change_ratio, 1.0 / 12.0);
        assert_eq!(s.mask_density, 1.0 / 4.0);
    }

    #[test]
    fn identical_stats_score_one() {
        let stats = vec![stats_with_ratio(0.3); 7];
        let s = consistency_score(&stats, 0.5, 0.5).unwrap();
        assert_eq!((s.c_qty, s.c_spa, s.s_cons), (1.0, 1.0, 1.0));
    }

    #[test]
    fn worked_quantity_example() {
        let stats: Vec<_> = [0.1, 0.2, 0.3].iter().map(|&r| stats_with_ratio(r)).collect();
        let s = consistency_score(&stats, 0.5, 0.5).unwrap();
        // population sigma of [0.1, 0.2, 0.3] by direct summation
        let m = (0.1 + 0.2 + 0.3) / 3.0;
        let sigma = (((0.1f64 - m).powi(2) + (0.2f64 - m).powi(2) + (0.3f64 - m).powi(2)) / 3.0).sqrt();
        assert!((sigma - 0.0816496580927726).abs() < 1e-15);
        assert!((s.c_qty - 1.0 / (1.0 + sigma)).abs() < 1e-12);
        assert!((s.c_qty - 0.92451).abs() < 1e-5);
        assert_eq!(s.c_spa, 1.0);
    }

    #[test]
    fn too_few_stats() {
        assert!(matches!(
            consistency_score(&[stats_with_ratio(0.1)], 0.5, 0.5),
            Err(ConsistencyError::TooFewStats(1))
        ));
    }

    #[test]
    fn negative_weight_rejected() {
        let stats = vec![stats_with_ratio(0.1); 2];
        assert!(consistency_score(&stats, -0.1, 0.5).is_err());
    }

    #[test]
    fn permutation_invariant() {
        let stats: Vec<_> = [0.05, 0.4, 0.2, 0.9].iter().map(|&r| stats_with_ratio(r)).collect();
        let mut shuffled = stats.clone();
        shuffled.swap(0, 3);
        shuffled.swap(1, 2);
        let a = consistency_score(&stats, 0.5, 0.5).unwrap();
        let b = consistency_score(&shuffled, 0.5, 0.5).unwrap();
        assert!((a.c_qty - b.c_qty).abs() < 1e-15);
        assert!((a.c_spa - b.c_spa).abs() < 1e-15);
    }

    #[test]
    fn region_layout_validation() {
        assert!(RegionLayout::default().validate().is_ok());
        let bad = RegionLayout {
            border_margin: 0.3,
            center_fraction: 0.6,
        };
        assert!(bad.validate().is_err());
    }
}
