//! Logistic regression trained by full-batch gradient descent.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::MicroscopeError;
use crate::Label;

pub const MODEL_FORMAT: &str = "mpfscope-classifier";
const MODEL_VERSION: u32 = 1;

/// Labelled feature rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl Dataset {
    pub fn push(&mut self, row: Vec<f64>, label: Label) {
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn targets(&self) -> Vec<f64> {
        self.labels
            .iter()
            .map(|l| if *l == Label::Ai { 1.0 } else { 0.0 })
            .collect()
    }

    fn check(&self) -> Result<(), MicroscopeError> {
        let dim = self.dim();
        if self.rows.iter().any(|r| r.len() != dim) || self.rows.len() != self.labels.len() {
            return Err(MicroscopeError::RaggedDataset);
        }
        if let Some(i) = self
            .rows
            .iter()
            .flatten()
            .position(|v| !v.is_finite())
        {
            return Err(MicroscopeError::NonFinite(i % dim.max(1)));
        }
        let ai = self.labels.iter().filter(|l| **l == Label::Ai).count();
        let real = self.labels.len() - ai;
        if ai < 2 || real < 2 {
            return Err(MicroscopeError::TooFewPerClass { ai, real });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Stop once an accepted step lowers the loss by less than this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            learning_rate: 0.1,
            seed: 0,
            tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_loss: f64,
    pub epochs_run: usize,
    /// Loss after initialization and after every accepted step.
    pub loss_history: Vec<f64>,
    pub final_learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format: String,
    pub version: u32,
    /// Length of the raw feature vectors the model accepts.
    pub input_dim: usize,
    /// Raw feature indices kept after dropping zero-variance dimensions.
    pub kept_dims: Vec<usize>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub train_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Label,
    pub probability: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean binary cross-entropy and its gradient. `params` holds the weights
/// followed by the bias.
pub fn loss_and_gradient(params: &[f64], rows: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
    let dim = params.len() - 1;
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (x, &y) in rows.iter().zip(targets) {
        let z = x.iter().zip(&params[..dim]).map(|(a, w)| a * w).sum::<f64>() + params[dim];
        loss += softplus(z) - y * z;
        let err = sigmoid(z) - y;
        for (g, a) in grad[..dim].iter_mut().zip(x) {
            *g += err * a;
        }
        grad[dim] += err;
    }
    for g in grad.iter_mut() {
        *g /= n;
    }
    (loss / n, grad)
}

/// Fits the model. The learning rate is halved whenever a step would raise
/// the loss, and that step is discarded.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<(ClassifierModel, TrainReport), MicroscopeError> {
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(MicroscopeError::InvalidConfig(format!(
            "learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    data.check()?;
    let input_dim = data.dim();
    let n = data.len() as f64;

    let mut kept_dims = Vec::new();
    let mut feature_mean = Vec::new();
    let mut feature_std = Vec::new();
    for j in 0..input_dim {
        let mean = data.rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = data.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 1e-12 * mean.abs().max(1.0) {
            kept_dims.push(j);
            feature_mean.push(mean);
            feature_std.push(std);
        }
    }
    let normalized: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| normalize(r, &kept_dims, &feature_mean, &feature_std))
        .collect();
    let targets = data.targets();

    let dim = kept_dims.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 0.01).expect("valid init scale");
    let mut params: Vec<f64> = (0..dim).map(|_| init.sample(&mut rng)).collect();
    params.push(0.0);

    let mut lr = cfg.learning_rate;
    let (mut loss, mut grad) = loss_and_gradient(&params, &normalized, &targets);
    let mut history = vec![loss];
    let mut epochs_run = 0;
    for _ in 0..cfg.epochs {
        epochs_run += 1;
        let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - lr * g).collect();
        let (new_loss, new_grad) = loss_and_gradient(&candidate, &normalized, &targets);
        if new_loss > loss || !new_loss.is_finite() {
            lr *= 0.5;
            if lr < 1e-12 {
                break;
            }
            continue;
        }
        let improvement = loss - new_loss;
        params = candidate;
        loss = new_loss;
        grad = new_grad;
        history.push(loss);
        if improvement < cfg.tolerance {
            break;
        }
    }

    let bias = params.pop().expect("bias present");
    let model = ClassifierModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        input_dim,
        kept_dims,
        feature_mean,
        feature_std,
        weights: params,
        bias,
        train_loss: loss,
    };
    let report = TrainReport {
        final_loss: loss,
        epochs_run,
        loss_history: history,
        final_learning_rate: lr,
    };
    Ok((model, report))
}

fn normalize(row: &[f64], kept: &[usize], mean: &[f64], std: &[f64]) -> Vec<f64> {
    kept.iter()
        .zip(mean.iter().zip(std))
        .map(|(&j, (m, s))| (row[j] - m) / s)
        .collect()
}

impl ClassifierModel {
    /// A model with no usable features and the given bias.
    pub fn constant(input_dim: usize, bias: f64) -> Self {
        ClassifierModel {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            input_dim,
            kept_dims: Vec::new(),
            feature_mean: Vec::new(),
            feature_std: Vec::new(),
            weights: Vec::new(),
            bias,
            train_loss: f64::NAN,
        }
    }

    /// `w . x_hat + b` for a raw feature vector.
    pub fn decision_value(&self, features: &[f64]) -> Result<f64, MicroscopeError> {
        if features.len() != self.input_dim {
            return Err(MicroscopeError::DimMismatch {
                expected: self.input_dim,
                actual: features.len(),
            });
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(MicroscopeError::NonFinite(i));
        }
        let x = normalize(features, &self.kept_dims, &self.feature_mean, &self.feature_std);
        Ok(x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() + self.bias)
    }

    fn validate(&self) -> Result<(), String> {
        if self.format != MODEL_FORMAT {
            return Err(format!("unexpected format `{}`", self.format));
        }
        let k = self.kept_dims.len();
        if self.feature_mean.len() != k || self.feature_std.len() != k || self.weights.len() != k {
            return Err("normalizer and weight lengths differ".into());
        }
        if self.kept_dims.iter().any(|&j| j >= self.input_dim) {
            return Err("kept dimension out of range".into());
        }
        if self.feature_std.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err("normalizer std must be positive".into());
        }
        Ok(())
    }

    /// JSON with every float written to 17 significant digits.
    pub fn to_json(&self) -> String {
        fn num(v: f64) -> String {
            if v.is_finite() {
                format!("{v:.16e}")
            } else {
                "null".to_string()
            }
        }
        fn list(values: &[f64]) -> String {
            let items: Vec<String> = values.iter().map(|&v| num(v)).collect();
            format!("[{}]", items.join(", "))
        }
        let kept: Vec<String> = self.kept_dims.iter().map(|j| j.to_string()).collect();
        let mut s = String::new();
        let _ = writeln!(s, "{{");
        let _ = writeln!(s, "  \"format\": \"{}\",", self.format);
        let _ = writeln!(s, "  \"version\": {},", self.version);
        let _ = writeln!(s, "  \"input_dim\": {},", self.input_dim);
        let _ = writeln!(s, "  \"kept_dims\": [{}],", kept.join(", "));
        let _ = writeln!(s, "  \"feature_mean\": {},", list(&self.feature_mean));
        let _ = writeln!(s, "  \"feature_std\": {},", list(&self.feature_std));
        let _ = writeln!(s, "  \"weights\": {},", list(&self.weights));
        let _ = writeln!(s, "  \"bias\": {},", num(self.bias));
        let _ = writeln!(s, "  \"train_loss\": {}", num(self.train_loss));
        let _ = writeln!(s, "}}");
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct Raw {
            format: String,
            version: u32,
            input_dim: usize,
            kept_dims: Vec<usize>,
            feature_mean: Vec<f64>,
            feature_std: Vec<f64>,
            weights: Vec<f64>,
            bias: f64,
            train_loss: Option<f64>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let model = ClassifierModel {
            format: raw.format,
            version: raw.version,
            input_dim: raw.input_dim,
            kept_dims: raw.kept_dims,
            feature_mean: raw.feature_mean,
            feature_std: raw.feature_std,
            weights: raw.weights,
            bias: raw.bias,
            train_loss: raw.train_loss.unwrap_or(f64::NAN),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), MicroscopeError> {
        fs::write(path, self.to_json()).map_err(|e| MicroscopeError::ModelFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, MicroscopeError> {
        let err = |reason: String| MicroscopeError::ModelFile {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        ClassifierModel::from_json(&text).map_err(err)
    }
}

/// `P(AI) = sigmoid(w . x_hat + b)`; AI only when strictly above 0.5.
pub fn classify(model: &ClassifierModel, features: &[f64]) -> Result<Classification, MicroscopeError> {
    let probability = sigmoid(model.decision_value(features)?);
    let verdict = if probability > 0.5 { Label::Ai } else { Label::Real };
    Ok(Classification {
        verdict,
        probability,
    })
}
