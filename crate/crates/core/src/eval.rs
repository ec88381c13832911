//! Detection metrics, per-subset quality profiles and report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synthgen::CorpusManifest;
use crate::Label;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{labels} labels but {verdicts} verdicts")]
    LengthMismatch { labels: usize, verdicts: usize },
    #[error("no prediction for corpus entry `{0}`")]
    MissingPrediction(String),
    #[error("prediction `{0}` has no corpus entry")]
    UnknownPrediction(String),
    #[error("quality inputs must be positive: subset `{subset}` has {field} = {value}")]
    NonPositive {
        subset: String,
        field: &'static str,
        value: f64,
    },
}

impl EvalError {
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::LengthMismatch { .. } => "length_mismatch",
            EvalError::MissingPrediction(_) => "missing_prediction",
            EvalError::UnknownPrediction(_) => "unknown_prediction",
            EvalError::NonPositive { .. } => "non_positive",
        }
    }
}

/// Confusion counts with AI as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn from_pairs(labels: &[Label], verdicts: &[Label]) -> Result<Self, EvalError> {
        if labels.len() != verdicts.len() {
            return Err(EvalError::LengthMismatch {
                labels: labels.len(),
                verdicts: verdicts.len(),
            });
        }
        let mut c = Confusion::default();
        for (l, v) in labels.iter().zip(verdicts) {
            c.add(*l, *v);
        }
        Ok(c)
    }

    pub fn add(&mut self, label: Label, verdict: Label) {
        match (label, verdict) {
            (Label::Ai, Label::Ai) => self.tp += 1,
            (Label::Ai, Label::Real) => self.fn_ += 1,
            (Label::Real, Label::Ai) => self.fp += 1,
            (Label::Real, Label::Real) => self.tn += 1,
        }
    }

    pub fn merge(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            confusion: *self,
            total: self.total(),
            recall: self.recall(),
            precision: self.precision(),
            f1: self.f1(),
            accuracy: self.accuracy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub total: usize,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
}

pub fn metrics(labels: &[Label], verdicts: &[Label]) -> Result<Metrics, EvalError> {
    Ok(Confusion::from_pairs(labels, verdicts)?.metrics())
}

/// Raw technical profile of one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityInput {
    pub subset: String,
    pub fps: f64,
    pub bitrate_mbps: f64,
    pub resolution_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityProfile {
    pub subset: String,
    pub fps: f64,
    pub bitrate_mbps: f64,
    pub resolution_n: f64,
    /// Mean of the three min-max normalized dimensions over the run.
    pub composite: f64,
}

fn min_max(values: &[f64], v: f64) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.5
    }
}

/// Composite scores over all subsets of a run. A dimension on which every
/// subset agrees contributes 0.5.
pub fn quality_profiles(inputs: &[QualityInput]) -> Result<Vec<QualityProfile>, EvalError> {
    for q in inputs {
        for (field, value) in [
            ("fps", q.fps),
            ("bitrate_mbps", q.bitrate_mbps),
            ("resolution_n", q.resolution_n),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EvalError::NonPositive {
                    subset: q.subset.clone(),
                    field,
                    value,
                });
            }
        }
    }
    let fps: Vec<f64> = inputs.iter().map(|q| q.fps).collect();
    let bit: Vec<f64> = inputs.iter().map(|q| q.bitrate_mbps).collect();
    let res: Vec<f64> = inputs.iter().map(|q| q.resolution_n).collect();
    Ok(inputs
        .iter()
        .map(|q| QualityProfile {
            subset: q.subset.clone(),
            fps: q.fps,
            bitrate_mbps: q.bitrate_mbps,
            resolution_n: q.resolution_n,
            composite: (min_max(&fps, q.fps) + min_max(&bit, q.bitrate_mbps) + min_max(&res, q.resolution_n))
                / 3.0,
        })
        .collect())
}

/// Bytes per raw frame times fps, in megabits per second.
pub fn raw_bitrate_mbps(height: usize, width: usize, channels: usize, fps: f64) -> f64 {
    (height * width * channels) as f64 * fps * 8.0 / 1e6
}

/// Per-subset averages of fps, bitrate and pixel count from a corpus
/// manifest, in order of first appearance.
pub fn quality_inputs(manifest: &CorpusManifest) -> Vec<QualityInput> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, (f64, f64, f64, usize)> = BTreeMap::new();
    for e in &manifest.entries {
        let fps = e.fps.as_f64();
        let bitrate = e
            .bitrate_mbps
            .unwrap_or_else(|| raw_bitrate_mbps(e.height, e.width, e.channels, fps));
        let slot = acc.entry(e.subset.clone()).or_insert_with(|| {
            order.push(e.subset.clone());
            (0.0, 0.0, 0.0, 0)
        });
        slot.0 += fps;
        slot.1 += bitrate;
        slot.2 += (e.height * e.width) as f64;
        slot.3 += 1;
    }
    order
        .into_iter()
        .map(|s| {
            let (f, b, r, n) = acc[&s];
            let n = n as f64;
            QualityInput {
                subset: s,
                fps: f / n,
                bitrate_mbps: b / n,
                resolution_n: r / n,
            }
        })
        .collect()
}

pub fn quality_profile(manifest: &CorpusManifest) -> Result<Vec<QualityProfile>, EvalError> {
    quality_profiles(&quality_inputs(manifest))
}

/// Outcome of the two-stage detector on one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub verdict: Label,
    /// True when the frame gate decided and the residual stage never ran.
    pub intercepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBreakdown {
    pub intercepted: usize,
    pub interception_rate: f64,
    pub remaining: usize,
    /// Accuracy of the residual stage over the videos it saw.
    pub stage2_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subset: String,
    pub metrics: Metrics,
    pub stages: StageBreakdown,
    pub quality: Option<QualityProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Metrics,
    pub stages: StageBreakdown,
    pub subsets: Vec<SubsetReport>,
}

fn breakdown(items: &[(Label, &Prediction)]) -> StageBreakdown {
    let intercepted = items.iter().filter(|(_, p)| p.intercepted).count();
    let remaining: Vec<_> = items.iter().filter(|(_, p)| !p.intercepted).collect();
    let correct = remaining.iter().filter(|(l, p)| *l == p.verdict).count();
    StageBreakdown {
        intercepted,
        interception_rate: ratio(intercepted, items.len()),
        remaining: remaining.len(),
        stage2_accuracy: ratio(correct, remaining.len()),
    }
}

/// Joins predictions to the manifest by id and reports metrics overall and
/// per subset.
pub fn evaluate(manifest: &CorpusManifest, predictions: &[Prediction]) -> Result<EvalReport, EvalError> {
    let by_id: BTreeMap<&str, &Prediction> =
        predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    for p in predictions {
        if !manifest.entries.iter().any(|e| e.id == p.id) {
            return Err(EvalError::UnknownPrediction(p.id.clone()));
        }
    }
    let mut joined: Vec<(String, Label, &Prediction)> = Vec::new();
    for e in &manifest.entries {
        let p = by_id
            .get(e.id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(e.id.clone()))?;
        joined.push((e.subset.clone(), e.label, p));
    }

    let mut overall = Confusion::default();
    for (_, l, p) in &joined {
        overall.add(*l, p.verdict);
    }
    let all: Vec<(Label, &Prediction)> = joined.iter().map(|(_, l, p)| (*l, *p)).collect();

    let profiles = quality_profile(manifest)?;
    let mut subsets = Vec::new();
    for q in &profiles {
        let items: Vec<(Label, &Prediction)> = joined
            .iter()
            .filter(|(s, _, _)| *s == q.subset)
            .map(|(_, l, p)| (*l, *p))
            .collect();
        let mut c = Confusion::default();
        for (l, p) in &items {
            c.add(*l, p.verdict);
        }
        subsets.push(SubsetReport {
            subset: q.subset.clone(),
            metrics: c.metrics(),
            stages: breakdown(&items),
            quality: Some(q.clone()),
        });
    }
    Ok(EvalReport {
        overall: overall.metrics(),
        stages: breakdown(&all),
        subsets,
    })
}

/// CSV of composite quality against residual-stage accuracy, one row per
/// subset.
pub fn correlation_report(reports: &[SubsetReport]) -> String {
    let mut out = String::from("subset,composite,stage2_accuracy,remaining_samples\n");
    for r in reports {
        let composite = r.quality.as_ref().map_or(f64::NAN, |q| q.composite);
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{}",
            r.subset, composite, r.stages.stage2_accuracy, r.stages.remaining
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(ai: usize, real: usize) -> Vec<Label> {
        let mut v = vec![Label::Ai; ai];
        v.extend(vec![Label::Real; real]);
        v
    }

    #[test]
    fn all_correct() {
        let l = labels(10, 10);
        let m = metrics(&l, &l).unwrap();
        assert_eq!((m.recall, m.f1, m.accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn worked_f1() {
        let c = Confusion {
            tp: 8,
            fn_: 2,
            fp: 1,
            tn: 0,
        };
        assert!((c.recall() - 0.8).abs() < 1e-15);
        assert!((c.precision() - 8.0 / 9.0).abs() < 1e-15);
        let expected = 2.0 * (8.0 / 9.0 * 0.8) / (8.0 / 9.0 + 0.8);
        assert!((c.f1() - expected).abs() < 1e-15);
        assert!((c.f1() - 0.842105).abs() < 1e-6);
    }

    #[test]
    fn no_predicted_positives() {
        let m = metrics(&labels(5, 5), &[Label::Real; 10]).unwrap();
        assert_eq!((m.recall, m.precision, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn length_mismatch() {
        assert!(metrics(&labels(1, 1), &labels(1, 0)).is_err());
    }

    #[test]
    fn table_extremes() {
        let q = quality_profiles(&[
            QualityInput {
                subset: "sora".into(),
                fps: 30.0,
                bitrate_mbps: 10.86,
                resolution_n: 1430178.0,
            },
            QualityInput {
                subset: "show1".into(),
                fps: 8.0,
                bitrate_mbps: 0.38,
                resolution_n: 184320.0,
            },
        ])
        .unwrap();
        assert_eq!(q[0].composite, 1.0);
        assert_eq!(q[1].composite, 0.0);
    }

    #[test]
    fn degenerate_profiles() {
        let one = QualityInput {
            subset: "a".into(),
            fps: 8.0,
            bitrate_mbps: 1.0,
            resolution_n: 4096.0,
        };
        let q = quality_profiles(&[one.clone(), QualityInput { subset: "b".into(), ..one.clone() }]).unwrap();
        assert!(q.iter().all(|p| p.composite == 0.5));
        assert_eq!(quality_profiles(&[one]).unwrap()[0].composite, 0.5);
    }

    #[test]
    fn non_positive_quality_rejected() {
        let bad = QualityInput {
            subset: "z".into(),
            fps: 0.0,
            bitrate_mbps: 1.0,
            resolution_n: 1.0,
        };
        assert!(quality_profiles(&[bad]).is_err());
    }
}
