//! Frozen-decoder regime: frames are projections of a slowly drifting latent
//! path through fixed weights, so every residual lies (to first order) in the
//! span of the decoder Jacobian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::sampling::{Fps, Frame, FrameSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    None,
    TanhHidden,
}

#[derive(Debug, Clone, PartialEq)]
struct HiddenLayer {
    /// `M x M`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// `D(z) = W z + b`, or `D(z) = W tanh(V z + c) + b` with a hidden layer of
/// width `M`. `W` is `N x M`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    output_dim: usize,
    latent_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    hidden: Option<HiddenLayer>,
}

impl DecoderModel {
    pub fn new(
        output_dim: usize,
        latent_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, SynthError> {
        if latent_dim == 0 || latent_dim >= output_dim {
            return Err(SynthError::NotCompressive {
                latent: latent_dim,
                output: output_dim,
            });
        }
        if weights.len() != output_dim * latent_dim || bias.len() != output_dim {
            return Err(SynthError::ShapeMismatch(format!(
                "decoder expects {}x{} weights and {} biases",
                output_dim, latent_dim, output_dim
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(SynthError::NonFinite);
        }
        Ok(DecoderModel {
            output_dim,
            latent_dim,
            weights,
            bias,
            hidden: None,
        })
    }

    /// Random frozen decoder with `W ~ N(0, 1/M)` and `b ~ N(0, 0.25)`.
    pub fn random(
        output_dim: usize,
        latent_dim: usize,
        nonlinearity: Nonlinearity,
        seed: u64,
    ) -> Result<Self, SynthError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_dist = Normal::new(0.0, (1.0 / latent_dim.max(1) as f64).sqrt())
            .map_err(|e| SynthError::ShapeMismatch(e.to_string()))?;
        let weights: Vec<f64> = (0..output_dim * latent_dim)
            .map(|_| w_dist.sample(&mut rng))
            .collect();
        let bias: Vec<f64> = (0..output_dim)
            .map(|_| 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect::<Vec<f64>>();
        let mut model = DecoderModel::new(output_dim, latent_dim, weights, bias)?;
        if nonlinearity == Nonlinearity::TanhHidden {
            let hw: Vec<f64> = (0..latent_dim * latent_dim)
                .map(|_| w_dist.sample(&mut rng))
                .collect();
            let hb: Vec<f64> = (0..latent_dim)
                .map(|_| 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect::<Vec<f64>>();
            model.hidden = Some(HiddenLayer {
                weights: hw,
                bias: hb,
            });
        }
        Ok(model)
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        if self.hidden.is_some() {
            Nonlinearity::TanhHidden
        } else {
            Nonlinearity::None
        }
    }

    /// Column `j` of `W`: the pixel pattern excited by latent unit `j` in the
    /// linear model.
    pub fn basis_column(&self, j: usize) -> Vec<f64> {
        (0..self.output_dim)
            .map(|i| self.weights[i * self.latent_dim + j])
            .collect()
    }

    fn hidden_activation(&self, z: &[f64]) -> Vec<f64> {
        match &self.hidden {
            None => z.to_vec(),
            Some(layer) => {
                let m = self.latent_dim;
                (0..m)
                    .map(|i| {
                        let pre: f64 = layer.weights[i * m..(i + 1) * m]
                            .iter()
                            .zip(z)
                            .map(|(w, v)| w * v)
                            .sum::<f64>()
                            + layer.bias[i];
                        pre.tanh()
                    })
                    .collect()
            }
        }
    }

    pub fn decode(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.latent_dim, "latent vector has wrong length");
        let a = self.hidden_activation(z);
        self.weights
            .chunks_exact(self.latent_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Jacobian by central differences, `N x M` row-major.
    pub fn jacobian_fd(&self, z: &[f64], step: f64) -> Vec<f64> {
        let (n, m) = (self.output_dim, self.latent_dim);
        let mut jac = vec![0.0; n * m];
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        for j in 0..m {
            zp[j] = z[j] + step;
            zm[j] = z[j] - step;
            let fp = self.decode(&zp);
            let fm = self.decode(&zm);
            for i in 0..n {
                jac[i * m + j] = (fp[i] - fm[i]) / (2.0 * step);
            }
            zp[j] = z[j];
            zm[j] = z[j];
        }
        jac
    }
}

/// Latent path `z_0 .. z_{L-1}` moving at constant speed along a slowly
/// turning direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTrajectory {
    pub z0: Vec<f64>,
    /// Per-component step scale; every step has norm `drift * sqrt(M)`.
    pub drift: f64,
    pub steps: usize,
    pub seed: u64,
}

/// Weight on the previous velocity when the next one is drawn.
const VELOCITY_PERSISTENCE: f64 = 0.8;

impl LatentTrajectory {
    /// Starting point drawn from `N(0, I_M)`.
    pub fn random(latent_dim: usize, drift: f64, steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f1a_7e47);
        let z0 = (0..latent_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        LatentTrajectory {
            z0,
            drift,
            steps,
            seed,
        }
    }

    /// All `steps` latent points, starting with `z0`.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let m = self.z0.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut velocity: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut z = self.z0.clone();
        let mut out = Vec::with_capacity(self.steps);
        for t in 0..self.steps {
            if t > 0 {
                for v in velocity.iter_mut() {
                    let fresh: f64 = rng.random_range(-1.0..=1.0);
                    *v = (VELOCITY_PERSISTENCE * *v + (1.0 - VELOCITY_PERSISTENCE) * 2.0 * fresh)
                        .clamp(-1.0, 1.0);
                }
                // steady speed: every step has norm drift * sqrt(M)
                let norm = velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    let step = self.drift * (m as f64).sqrt() / norm;
                    for (zi, v) in z.iter_mut().zip(&velocity) {
                        *zi += step * v;
                    }
                }
            }
            out.push(z.clone());
        }
        out
    }
}

/// Output range that frame 0 is stretched to; later frames may drift past it
/// and are clipped at quantization.
const RESCALE_LO: f64 = 32.0;
const RESCALE_HI: f64 = 223.0;

/// Decoded frames after the per-sequence affine rescale, before rounding.
pub fn decode_trajectory(model: &DecoderModel, traj: &LatentTrajectory) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> = traj.points().iter().map(|z| model.decode(z)).collect();
    let Some(first) = raw.first() else {
        return raw;
    };
    let (lo, hi) = first
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let gain = if hi > lo {
        (RESCALE_HI - RESCALE_LO) / (hi - lo)
    } else {
        1.0
    };
    let offset = RESCALE_LO - gain * lo;
    raw.into_iter()
        .map(|f| f.into_iter().map(|v| gain * v + offset).collect())
        .collect()
}

pub fn generate_decoder_sequence(
    model: &DecoderModel,
    traj: &LatentTrajectory,
    shape: (usize, usize, usize),
    fps: Fps,
) -> Result<FrameSequence, SynthError> {
    let (h, w, c) = shape;
    if h * w * c != model.output_dim() {
        return Err(SynthError::ShapeMismatch(format!(
            "frame shape {h}x{w}x{c} does not match decoder output {}",
            model.output_dim()
        )));
    }
    if traj.z0.len() != model.latent_dim() {
        return Err(SynthError::ShapeMismatch(format!(
            "trajectory has {} latent dims, decoder expects {}",
            traj.z0.len(),
            model.latent_dim()
        )));
    }
    if traj.steps == 0 {
        return Err(SynthError::ShapeMismatch("trajectory has no steps".into()));
    }
    let frames = decode_trajectory(model, traj)
        .into_iter()
        .map(|f| {
            let data = f.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
            Frame::new(h, w, c, data)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrameSequence::new(
        frames,
        fps,
        format!("decoder-{}", traj.seed),
    )?)
}
