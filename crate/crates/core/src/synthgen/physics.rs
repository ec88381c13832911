//! Physical-recording regime: a static scene seen through integer camera
//! jitter, fresh sensor noise on every frame, and an occasional small moving
//! object.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::sampling::{Fps, Frame, FrameSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseScene {
    #[default]
    RandomTexture,
    Gradient,
    Checkerboard,
}

impl std::str::FromStr for BaseScene {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random-texture" | "random_texture" => Ok(BaseScene::RandomTexture),
            "gradient" => Ok(BaseScene::Gradient),
            "checkerboard" => Ok(BaseScene::Checkerboard),
            other => Err(format!("unknown base scene `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsModel {
    /// Largest camera offset from the rest position, in whole pixels.
    pub jitter_px: u32,
    /// Standard deviation of per-frame Gaussian sensor noise.
    pub shot_noise_sigma: f64,
    /// Chance that a given frame shows the moving object.
    pub motion_prob: f64,
    /// Side of the moving square in pixels.
    pub object_size: usize,
    pub seed: u64,
}

impl Default for PhysicsModel {
    fn default() -> Self {
        PhysicsModel {
            jitter_px: 1,
            shot_noise_sigma: 0.35,
            motion_prob: 0.5,
            object_size: 8,
            seed: 0,
        }
    }
}

impl PhysicsModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        let ok = self.shot_noise_sigma >= 0.0
            && self.shot_noise_sigma.is_finite()
            && (0.0..=1.0).contains(&self.motion_prob);
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidParameter(format!(
                "physics model needs sigma >= 0 and motion_prob in [0, 1], got {self:?}"
            )))
        }
    }
}

/// Scene intensities in `[0, 255]`, row-major `H x W x C`.
pub fn render_scene(scene: BaseScene, shape: (usize, usize, usize), seed: u64) -> Vec<f64> {
    let (h, w, c) = shape;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5c3e_e000);
    let mut out = vec![0.0; h * w * c];
    match scene {
        BaseScene::RandomTexture => {
            // a handful of low-frequency plane waves per channel
            let waves: Vec<Vec<(f64, f64, f64, f64)>> = (0..c)
                .map(|_| {
                    (0..6)
                        .map(|_| {
                            let fx: f64 = rng.random_range(0.5..4.0) * std::f64::consts::TAU / w as f64;
                            let fy: f64 = rng.random_range(0.5..4.0) * std::f64::consts::TAU / h as f64;
                            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                            let amp: f64 = rng.random_range(8.0..20.0);
                            (fx, fy, phase, amp)
                        })
                        .collect()
                })
                .collect();
            for y in 0..h {
                for x in 0..w {
                    for (ch, ws) in waves.iter().enumerate() {
                        let v: f64 = ws
                            .iter()
                            .map(|&(fx, fy, ph, a)| a * (fx * x as f64 + fy * y as f64 + ph).sin())
                            .sum();
                        out[(y * w + x) * c + ch] = (128.0 + v).clamp(0.0, 255.0);
                    }
                }
            }
        }
        BaseScene::Gradient => {
            let span = (w + h).saturating_sub(2).max(1) as f64;
            for y in 0..h {
                for x in 0..w {
                    let t = (x + y) as f64 / span;
                    for ch in 0..c {
                        out[(y * w + x) * c + ch] = 30.0 + 195.0 * t - 10.0 * ch as f64;
                    }
                }
            }
        }
        BaseScene::Checkerboard => {
            for y in 0..h {
                for x in 0..w {
                    let v = if (x / 8 + y / 8) % 2 == 0 { 64.0 } else { 192.0 };
                    for ch in 0..c {
                        out[(y * w + x) * c + ch] = v;
                    }
                }
            }
        }
    }
    out
}

/// Float frames before rounding.
pub fn physics_frames(
    model: &PhysicsModel,
    scene: BaseScene,
    shape: (usize, usize, usize),
    steps: usize,
) -> Result<Vec<Vec<f64>>, SynthError> {
    model.validate()?;
    let (h, w, c) = shape;
    if h == 0 || w == 0 || c == 0 {
        return Err(SynthError::ShapeMismatch(format!(
            "empty frame shape {h}x{w}x{c}"
        )));
    }
    let base = render_scene(scene, shape, model.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let noise = Normal::new(0.0, model.shot_noise_sigma.max(0.0))
        .map_err(|e| SynthError::InvalidParameter(e.to_string()))?;

    let j = model.jitter_px as i64;
    let obj = model.object_size.min(h).min(w);
    let mut pos = (
        rng.random_range(0..h as i64),
        rng.random_range(0..w as i64),
    );
    let vel = loop {
        let v: (i64, i64) = (rng.random_range(-2..=2), rng.random_range(-2..=2));
        if v != (0, 0) {
            break v;
        }
    };
    let object_value = [235.0, 40.0, 120.0];

    let mut frames = Vec::with_capacity(steps);
    for t in 0..steps {
        let (oy, ox) = if t == 0 || j == 0 {
            (0, 0)
        } else {
            (rng.random_range(-j..=j), rng.random_range(-j..=j))
        };
        let show_object = obj > 0 && model.motion_prob > 0.0 && rng.random::<f64>() < model.motion_prob;
        if t > 0 {
            pos = (
                (pos.0 + vel.0).rem_euclid(h as i64),
                (pos.1 + vel.1).rem_euclid(w as i64),
            );
        }
        let mut frame = vec![0.0; h * w * c];
        for y in 0..h {
            let sy = (y as i64 - oy).rem_euclid(h as i64) as usize;
            for x in 0..w {
                let sx = (x as i64 - ox).rem_euclid(w as i64) as usize;
                let src = (sy * w + sx) * c;
                let dst = (y * w + x) * c;
                frame[dst..dst + c].copy_from_slice(&base[src..src + c]);
            }
        }
        if show_object {
            for dy in 0..obj {
                let y = (pos.0 as usize + dy) % h;
                for dx in 0..obj {
                    let x = (pos.1 as usize + dx) % w;
                    for ch in 0..c {
                        frame[(y * w + x) * c + ch] = object_value[ch % 3];
                    }
                }
            }
        }
        if model.shot_noise_sigma > 0.0 {
            for v in frame.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn generate_physics_sequence(
    model: &PhysicsModel,
    scene: BaseScene,
    shape: (usize, usize, usize),
    steps: usize,
    fps: Fps,
) -> Result<FrameSequence, SynthError> {
    let (h, w, c) = shape;
    let frames = physics_frames(model, scene, shape, steps)?
        .into_iter()
        .map(|f| {
            let data = f.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
            Frame::new(h, w, c, data)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrameSequence::new(
        frames,
        fps,
        format!("physics-{}", model.seed),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_limit_has_no_residual() {
        let model = PhysicsModel {
            jitter_px: 0,
            shot_noise_sigma: 0.0,
            motion_prob: 0.0,
            object_size: 8,
            seed: 4,
        };
        for scene in [BaseScene::RandomTexture, BaseScene::Gradient, BaseScene::Checkerboard] {
            let seq = generate_physics_sequence(&model, scene, (16, 16, 3), 8, Fps::default()).unwrap();
            assert!(seq.frames().windows(2).all(|p| p[0] == p[1]));
        }
    }

    #[test]
    fn invalid_probability() {
        let model = PhysicsModel {
            motion_prob: 1.5,
            ..PhysicsModel::default()
        };
        assert!(physics_frames(&model, BaseScene::Gradient, (4, 4, 3), 3).is_err());
    }

    #[test]
    fn scenes_stay_in_range() {
        for scene in [BaseScene::RandomTexture, BaseScene::Gradient, BaseScene::Checkerboard] {
            let v = render_scene(scene, (32, 32, 3), 11);
            assert!(v.iter().all(|x| (0.0..=255.0).contains(x)));
        }
    }
}
