//! Binary classification metrics with `Machine` as the positive class.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingest::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// F1 from counts; 0 when there are no positives at all.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

pub fn confusion(predictions: &[Label], labels: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (p, y) in predictions.iter().zip(labels) {
        match (p.is_machine(), y.is_machine()) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn check_scores(scores: &[f64], labels: &[Label]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore);
    }
    Ok(())
}

/// Area under the ROC curve via the Mann-Whitney rank statistic. Tied
/// scores receive their average rank, so a tied (pos, neg) pair counts 0.5.
pub fn auroc(scores: &[f64], labels: &[Label]) -> Result<f64, EvalError> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|l| l.is_machine()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::AurocUndefined);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k].is_machine()).count();
        pos_rank_sum += avg_rank * pos_in_group as f64;
        i = j;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub auroc: f64,
    pub confusion: ConfusionMatrix,
    pub n: u64,
    /// Metrics whose denominator was zero and were reported as 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_denominator: Vec<String>,
}

pub fn metrics(
    cm: &ConfusionMatrix,
    scores: &[f64],
    labels: &[Label],
) -> Result<MetricsReport, EvalError> {
    check_scores(scores, labels)?;
    if cm.total() != labels.len() as u64 {
        return Err(EvalError::LengthMismatch {
            left: cm.total() as usize,
            right: labels.len(),
        });
    }
    let mut zero_denominator = Vec::new();
    let mut ratio = |num: u64, den: u64, name: &str| {
        if den == 0 {
            zero_denominator.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(cm.tp, cm.tp + cm.fp, "precision");
    let recall = ratio(cm.tp, cm.tp + cm.fn_, "recall");
    let accuracy = ratio(cm.tp + cm.tn, cm.total(), "accuracy");
    if 2 * cm.tp + cm.fp + cm.fn_ == 0 {
        zero_denominator.push("f1".to_string());
    }
    Ok(MetricsReport {
        precision,
        recall,
        f1: cm.f1(),
        accuracy,
        auroc: auroc(scores, labels)?,
        confusion: *cm,
        n: cm.total(),
        zero_denominator,
    })
}

/// Predicted labels under the `score >= threshold → Machine` rule.
pub fn threshold_labels(scores: &[f64], threshold: f64) -> Vec<Label> {
    scores
        .iter()
        .map(|&s| if s >= threshold { Label::Machine } else { Label::Human })
        .collect()
}

/// Convenience: confusion + metrics for thresholded scores.
pub fn evaluate_scores(
    scores: &[f64],
    labels: &[Label],
    threshold: f64,
) -> Result<MetricsReport, EvalError> {
    let preds = threshold_labels(scores, threshold);
    let cm = confusion(&preds, labels)?;
    metrics(&cm, scores, labels)
}

/// Threshold maximizing Youden's J = TPR - FPR over the observed scores.
///
/// Candidates are the distinct scores (with the `>=` rule); ties in J keep
/// the larger threshold. Returns `(threshold, j)`.
pub fn youden_threshold(scores: &[f64], labels: &[Label]) -> Result<(f64, f64), EvalError> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|l| l.is_machine()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::AurocUndefined);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Descending so that sweeping lowers the threshold step by step.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = (f64::INFINITY, 0.0);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]].is_machine() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let j = tp as f64 / n_pos as f64 - fp as f64 / n_neg as f64;
        if j > best.1 {
            best = (t, j);
        }
    }
    if best.0.is_infinite() {
        // No threshold beats J = 0; classify everything as Human.
        best.0 = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    }
    Ok(best)
}
