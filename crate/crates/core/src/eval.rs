//! Classification and regression metrics with bootstrap summaries.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::argmax;
use crate::seed;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;

/// Square count matrix, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix(Vec<Vec<u64>>);

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if counts.iter().any(|row| row.len() != n) {
            return Err(Error::invalid("confusion matrix must be square"));
        }
        Ok(Self(counts))
    }

    pub fn n_classes(&self) -> usize {
        self.0.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.0.len()).map(|i| self.0[i][i]).sum()
    }

    /// `trace / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::invalid(format!("label pair ({t}, {p}) outside 0..{n_classes}")));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix(counts))
}

/// Per-class f1; a class with zero precision + recall scores 0.
pub fn f1_per_class(confusion: &ConfusionMatrix) -> Vec<f64> {
    let m = confusion.counts();
    let c = m.len();
    (0..c)
        .map(|k| {
            let tp = m[k][k] as f64;
            let predicted: u64 = (0..c).map(|i| m[i][k]).sum();
            let actual: u64 = m[k].iter().sum();
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<[f64; 2]>,
    pub auc: f64,
}

/// Binary ROC: one point per distinct score, swept from high to low, with
/// tied scores entering together. AUC by the trapezoidal rule.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<RocCurve> {
    if scores.len() != positive.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC needs both classes present ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![[0.0, 0.0]];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push([fp as f64 / n_neg as f64, tp as f64 / n_pos as f64]);
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]) * (w[1][1] + w[0][1]) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// One-vs-rest ROC for `class` from per-instance probability rows.
pub fn roc_ovr(probs: &[Vec<f64>], y_true: &[usize], class: usize) -> Result<RocCurve> {
    if probs.len() != y_true.len() {
        return Err(Error::invalid("probability rows and labels differ in length"));
    }
    let scores = probs
        .iter()
        .map(|row| {
            row.get(class)
                .copied()
                .ok_or_else(|| Error::invalid(format!("class {class} outside probability row")))
        })
        .collect::<Result<Vec<_>>>()?;
    let positive: Vec<bool> = y_true.iter().map(|&y| y == class).collect();
    roc_curve(&scores, &positive)
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "MAE needs equal nonzero lengths, got {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let sum: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum();
    Ok(sum / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    /// Population standard deviation across resamples.
    pub std: f64,
    pub resamples: usize,
}

/// Evaluates `metric` on `n_resamples` with-replacement resamples of
/// `0..n_instances`. Resample `r` draws from its own seeded stream.
pub fn bootstrap<F>(n_instances: usize, n_resamples: usize, seed: u64, metric: F) -> Result<BootstrapSummary>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if n_resamples == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    if n_instances == 0 {
        return Err(Error::insufficient("bootstrap over an empty evaluation set"));
    }
    let values = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed, "bootstrap", r as u64);
            let idx: Vec<usize> = (0..n_instances).map(|_| rng.random_range(0..n_instances)).collect();
            metric(&idx)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    // offsetting by the first value keeps a constant metric exact
    let base = values[0];
    let mean = base + values.iter().map(|v| v - base).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(BootstrapSummary {
        mean,
        std: var.sqrt(),
        resamples: n_resamples,
    })
}

pub fn bootstrap_accuracy(y_true: &[usize], y_pred: &[usize], n_resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if y_true.len() != y_pred.len() {
        return Err(Error::invalid("labels and predictions differ in length"));
    }
    bootstrap(y_true.len(), n_resamples, seed, |idx| {
        let hits = idx.iter().filter(|&&i| y_true[i] == y_pred[i]).count();
        Ok(hits as f64 / idx.len() as f64)
    })
}

pub fn bootstrap_mae(y_true: &[f64], y_pred: &[f64], n_resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    mae(y_true, y_pred)?;
    bootstrap(y_true.len(), n_resamples, seed, |idx| {
        let sum: f64 = idx.iter().map(|&i| (y_true[i] - y_pred[i]).abs()).sum();
        Ok(sum / idx.len() as f64)
    })
}

/// Evaluation of one model on one held-out set.
///
/// Classification reports fill the confusion, f1 and ROC fields;
/// regression reports fill the MAE fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub model: String,
    pub n_instances: usize,
    pub bootstrap_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<Vec<f64>>,
    /// Per class; `None` where the class lacks positives or negatives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc: Option<Vec<Option<RocCurve>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae_std: Option<f64>,
}

impl EvalReport {
    pub fn classification(
        model: &str,
        y_true: &[usize],
        probs: &[Vec<f64>],
        n_classes: usize,
        n_resamples: usize,
        seed: u64,
    ) -> Result<Self> {
        if y_true.len() != probs.len() {
            return Err(Error::invalid("labels and probability rows differ in length"));
        }
        let y_pred: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
        let confusion = confusion_matrix(y_true, &y_pred, n_classes)?;
        let boot = bootstrap_accuracy(y_true, &y_pred, n_resamples, seed)?;
        let roc = (0..n_classes).map(|k| roc_ovr(probs, y_true, k).ok()).collect();
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            model: model.to_string(),
            n_instances: y_true.len(),
            bootstrap_samples: n_resamples,
            accuracy: Some(confusion.accuracy()),
            accuracy_mean: Some(boot.mean),
            accuracy_std: Some(boot.std),
            f1: Some(f1_per_class(&confusion)),
            confusion: Some(confusion),
            roc: Some(roc),
            mae: None,
            mae_mean: None,
            mae_std: None,
        })
    }

    pub fn regression(model: &str, y_true: &[f64], y_pred: &[f64], n_resamples: usize, seed: u64) -> Result<Self> {
        let point = mae(y_true, y_pred)?;
        let boot = bootstrap_mae(y_true, y_pred, n_resamples, seed)?;
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            model: model.to_string(),
            n_instances: y_true.len(),
            bootstrap_samples: n_resamples,
            accuracy: None,
            accuracy_mean: None,
            accuracy_std: None,
            confusion: None,
            f1: None,
            roc: None,
            mae: Some(point),
            mae_mean: Some(boot.mean),
            mae_std: Some(boot.std),
        })
    }

    pub fn auc(&self) -> Option<Vec<Option<f64>>> {
        self.roc
            .as_ref()
            .map(|curves| curves.iter().map(|c| c.as_ref().map(|c| c.auc)).collect())
    }
}
