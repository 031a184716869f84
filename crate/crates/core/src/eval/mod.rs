//! Evaluation: confusion-matrix metrics, AUROC, adversarial rewrites and
//! before/after robustness reports for any [`Detector`].

mod adversarial;
mod metrics;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adversarial::{adversarial_transform, AdversarialTransform, TransformKind};
pub use metrics::{
    auroc, confusion, evaluate_scores, f1_score, metrics, threshold_labels, youden_threshold,
    ConfusionMatrix, MetricsReport,
};

use crate::ingest::{Corpus, Document, Label};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("inputs differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("AUROC is undefined when only one class is present")]
    AurocUndefined,
    #[error("scores must be finite")]
    NonFiniteScore,
    #[error("unknown transform kind `{0}`")]
    UnknownTransform(String),
    #[error("transform intensity {0} is outside [0, 1]")]
    InvalidIntensity(f64),
    #[error("scoring failed: {0}")]
    Scoring(BoxError),
}

/// Anything that maps a document to a score where higher means "more
/// likely machine-generated".
pub trait Detector {
    /// Short method tag used in reports, e.g. `logreg` or `detect_gpt`.
    fn method(&self) -> String;

    /// Scores at or above this value are labeled `Machine`.
    fn threshold(&self) -> f64;

    fn score(&self, doc: &Document) -> Result<f64, BoxError>;

    fn classify(&self, doc: &Document) -> Result<(f64, Label), BoxError> {
        let s = self.score(doc)?;
        let label = if s >= self.threshold() {
            Label::Machine
        } else {
            Label::Human
        };
        Ok((s, label))
    }
}

/// Score every document of `corpus` and compute metrics.
pub fn evaluate_detector<D: Detector + ?Sized>(
    detector: &D,
    corpus: &Corpus,
) -> Result<MetricsReport, EvalError> {
    let docs: Vec<&Document> = corpus.iter().collect();
    evaluate_documents(detector, &docs)
}

fn evaluate_documents<D: Detector + ?Sized>(
    detector: &D,
    docs: &[&Document],
) -> Result<MetricsReport, EvalError> {
    let scores = docs
        .iter()
        .map(|d| detector.score(d))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(EvalError::Scoring)?;
    let labels: Vec<Label> = docs.iter().map(|d| d.label).collect();
    evaluate_scores(&scores, &labels, detector.threshold())
}

/// Per-metric `after - before`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub auroc: f64,
}

impl MetricDeltas {
    fn between(before: &MetricsReport, after: &MetricsReport) -> Self {
        Self {
            precision: after.precision - before.precision,
            recall: after.recall - before.recall,
            f1: after.f1 - before.f1,
            accuracy: after.accuracy - before.accuracy,
            auroc: after.auroc - before.auroc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformOutcome {
    pub transform: AdversarialTransform,
    pub name: String,
    pub before: MetricsReport,
    pub after: MetricsReport,
    pub delta: MetricDeltas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub method: String,
    pub clean: MetricsReport,
    pub transforms: Vec<TransformOutcome>,
}

impl RobustnessReport {
    /// `transform,metric,before,after,delta` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("transform,metric,before,after,delta\n");
        for t in &self.transforms {
            let rows = [
                ("precision", t.before.precision, t.after.precision, t.delta.precision),
                ("recall", t.before.recall, t.after.recall, t.delta.recall),
                ("f1", t.before.f1, t.after.f1, t.delta.f1),
                ("accuracy", t.before.accuracy, t.after.accuracy, t.delta.accuracy),
                ("auroc", t.before.auroc, t.after.auroc, t.delta.auroc),
            ];
            for (metric, b, a, d) in rows {
                writeln!(out, "{},{metric},{b},{a},{d}", t.name).unwrap();
            }
        }
        out
    }
}

/// Clean metrics once, then metrics on each transformed copy of `test`.
pub fn robustness_report<D: Detector + ?Sized>(
    detector: &D,
    test: &Corpus,
    transforms: &[AdversarialTransform],
) -> Result<RobustnessReport, EvalError> {
    let docs: Vec<&Document> = test.iter().collect();
    let clean = evaluate_documents(detector, &docs)?;
    let mut outcomes = Vec::with_capacity(transforms.len());
    for t in transforms {
        let attacked = docs
            .iter()
            .map(|d| adversarial_transform(d, t))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&Document> = attacked.iter().collect();
        let after = evaluate_documents(detector, &refs)?;
        outcomes.push(TransformOutcome {
            transform: *t,
            name: t.name(),
            delta: MetricDeltas::between(&clean, &after),
            before: clean.clone(),
            after,
        });
    }
    Ok(RobustnessReport {
        method: detector.method(),
        clean,
        transforms: outcomes,
    })
}

/// Wraps a closure as a detector; handy for baselines and tests.
pub struct FnDetector<F> {
    pub name: String,
    pub threshold: f64,
    pub f: F,
}

impl<F> Detector for FnDetector<F>
where
    F: Fn(&Document) -> f64,
{
    fn method(&self) -> String {
        self.name.clone()
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn score(&self, doc: &Document) -> Result<f64, BoxError> {
        Ok((self.f)(doc))
    }
}
