//! Evaluation metrics and label decoding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} true labels, {} predictions",
                y_true.len(),
                y_pred.len()
            )));
        }
        if y_true.is_empty() {
            return Err(Error::InsufficientData("no labels to score".into()));
        }
        let mut counts = vec![vec![0; classes]; classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= classes || p >= classes {
                return Err(Error::InvalidConfig(format!(
                    "label pair ({t}, {p}) outside 0..{classes}"
                )));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> usize {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, c: usize) -> usize {
        self.counts[c][c]
    }

    pub fn false_positives(&self, c: usize) -> usize {
        (0..self.classes()).filter(|&t| t != c).map(|t| self.counts[t][c]).sum()
    }

    pub fn false_negatives(&self, c: usize) -> usize {
        (0..self.classes()).filter(|&p| p != c).map(|p| self.counts[c][p]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Classes whose precision or recall had a zero denominator and were
    /// scored as 0.
    pub undefined_classes: Vec<usize>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Accuracy plus precision, recall and F1. Two classes score class 1 as the
/// positive class; more classes average precision and recall over classes
/// (macro) and take F1 as their harmonic mean.
pub fn classification_metrics(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ClassificationMetrics> {
    if classes < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 classes, got {classes}")));
    }
    let cm = ConfusionMatrix::new(y_true, y_pred, classes)?;
    Ok(metrics_from_confusion(&cm))
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> ClassificationMetrics {
    let correct: usize = (0..cm.classes()).map(|c| cm.true_positives(c)).sum();
    let accuracy = correct as f64 / cm.total() as f64;
    let scored: Vec<usize> = if cm.classes() == 2 { vec![1] } else { (0..cm.classes()).collect() };
    let mut undefined_classes = Vec::new();
    let (mut p_sum, mut r_sum) = (0.0, 0.0);
    for &c in &scored {
        let tp = cm.true_positives(c);
        let p = ratio(tp, tp + cm.false_positives(c));
        let r = ratio(tp, tp + cm.false_negatives(c));
        if p.is_none() || r.is_none() {
            undefined_classes.push(c);
        }
        p_sum += p.unwrap_or(0.0);
        r_sum += r.unwrap_or(0.0);
    }
    let precision = p_sum / scored.len() as f64;
    let recall = r_sum / scored.len() as f64;
    ClassificationMetrics {
        accuracy,
        precision,
        recall,
        f1: harmonic(precision, recall),
        undefined_classes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when either vector has zero norm.
    pub cosine_distance: Option<f64>,
}

pub fn regression_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} targets, {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InsufficientData("no targets to score".into()));
    }
    let n = y_true.len() as f64;
    let mse = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / n;
    let mae = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / n;
    let dot: f64 = y_true.iter().zip(y_pred).map(|(t, p)| t * p).sum();
    let tt: f64 = y_true.iter().map(|t| t * t).sum();
    let pp: f64 = y_pred.iter().map(|p| p * p).sum();
    let cosine_distance = (tt > 0.0 && pp > 0.0).then(|| (1.0 - dot / (tt * pp).sqrt()).clamp(0.0, 2.0));
    Ok(RegressionMetrics {
        mse,
        mae,
        rmse: mse.sqrt(),
        cosine_distance,
    })
}

/// Nearest class id for a raw model output, clamped to `0..classes`.
/// Halves round away from zero.
pub fn label_decode(raw: f64, classes: usize) -> Result<usize> {
    if classes < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 classes, got {classes}")));
    }
    if !raw.is_finite() {
        return Err(Error::Decode(raw));
    }
    Ok(raw.round().clamp(0.0, (classes - 1) as f64) as usize)
}

pub fn decode_all(raw: &[f64], classes: usize) -> Result<Vec<usize>> {
    raw.iter().map(|&r| label_decode(r, classes)).collect()
}
