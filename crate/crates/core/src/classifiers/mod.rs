//! Classical classifiers over document feature vectors: logistic regression,
//! Gaussian naive Bayes (with Bayesian-optimized smoothing), a Pegasos linear
//! SVM and a CART random forest. Every family exposes a real-valued score
//! where higher means "more likely machine-generated".

mod bayesopt;
mod forest;
mod gnb;
mod logreg;
mod svm;

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use bayesopt::{maximize_1d, BoConfig, BoResult};
pub use forest::{
    gini, train_random_forest, train_random_forest_with, DecisionTree, MaxFeatures, RfConfig,
    RfModel, TreeNode,
};
pub use gnb::{train_gnb, tune_gnb, tune_var_smoothing, GnbModel, TuneResult};
pub use logreg::{logreg_gradient, logreg_objective, train_logreg, LogRegModel};
pub use svm::{svm_objective, train_linear_svm, SvmModel};

use crate::embeddings::{doc_vector, EmbeddingMatrix};
use crate::eval::{BoxError, Detector};
use crate::ingest::{ClassCounts, Corpus, Document, Label};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("features must be finite")]
    NonFinite,
    #[error("{0}")]
    InvalidParameter(String),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u64),
    #[error("invalid model file: {0}")]
    Format(String),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Feature matrix with binary labels (`Machine` = positive).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<Label>,
    ids: Vec<String>,
    dim: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<Label>,
        ids: Vec<String>,
    ) -> Result<Self, ClassifierError> {
        if features.is_empty() {
            return Err(ClassifierError::EmptyDataset);
        }
        if labels.len() != features.len() || ids.len() != features.len() {
            return Err(ClassifierError::InvalidParameter(
                "features, labels and ids must have equal length".into(),
            ));
        }
        let dim = features[0].len();
        for row in &features {
            if row.len() != dim {
                return Err(ClassifierError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ClassifierError::NonFinite);
            }
        }
        Ok(Self {
            features,
            labels,
            ids,
            dim,
        })
    }

    /// Unlabeled ids are generated as row indices.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self, ClassifierError> {
        let ids = (0..features.len()).map(|i| i.to_string()).collect();
        Self::new(features, labels, ids)
    }

    /// Mean-pooled embedding features for every document in `corpus`.
    pub fn from_corpus(corpus: &Corpus, emb: &EmbeddingMatrix) -> Result<Self, ClassifierError> {
        let features = corpus.iter().map(|d| doc_vector(&d.body, emb).values).collect();
        let labels = corpus.iter().map(|d| d.label).collect();
        let ids = corpus.iter().map(|d| d.id.clone()).collect();
        Self::new(features, labels, ids)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    /// 1.0 for `Machine`, 0.0 for `Human`.
    pub fn target(&self, i: usize) -> f64 {
        if self.labels[i].is_machine() {
            1.0
        } else {
            0.0
        }
    }

    pub fn class_counts(&self) -> ClassCounts {
        let machine = self.labels.iter().filter(|l| l.is_machine()).count();
        ClassCounts {
            human: self.labels.len() - machine,
            machine,
        }
    }

    pub fn require_both_classes(&self) -> Result<(), ClassifierError> {
        let c = self.class_counts();
        if c.human == 0 || c.machine == 0 {
            return Err(ClassifierError::SingleClass);
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            dim: self.dim,
        }
    }

    /// Row indices sorted by (features, label). Seeded shuffles start from
    /// this order so training does not depend on input row order.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.features[a]
                .iter()
                .zip(&self.features[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
                .then(self.labels[a].cmp(&self.labels[b]))
        });
        idx
    }
}

pub(crate) fn check_input(x: &[f64], dim: usize) -> Result<(), ClassifierError> {
    if x.len() != dim {
        return Err(ClassifierError::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

/// Per-feature z-scoring fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let n = data.len() as f64;
        let mut mean = vec![0.0; data.dim()];
        for row in data.features() {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; data.dim()];
        for row in data.features() {
            var.iter_mut()
                .zip(row.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m) / n);
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform_dataset(&self, data: &Dataset) -> Dataset {
        Dataset {
            features: data.features().iter().map(|r| self.transform(r)).collect(),
            labels: data.labels.clone(),
            ids: data.ids.clone(),
            dim: data.dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub score: f64,
    pub label: Label,
}

/// Parameters of one trained classifier family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    Logreg(LogRegModel),
    Gnb(GnbModel),
    Svm(SvmModel),
    RandomForest(RfModel),
}

impl TrainedModel {
    pub fn family(&self) -> &'static str {
        match self {
            TrainedModel::Logreg(_) => "logreg",
            TrainedModel::Gnb(_) => "gnb",
            TrainedModel::Svm(_) => "svm",
            TrainedModel::RandomForest(_) => "random_forest",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Logreg(m) => m.weights.len(),
            TrainedModel::Gnb(m) => m.dim(),
            TrainedModel::Svm(m) => m.weights.len(),
            TrainedModel::RandomForest(m) => m.dim,
        }
    }

    /// 0 for the SVM margin, 0.5 for probability-like scores.
    pub fn threshold(&self) -> f64 {
        match self {
            TrainedModel::Svm(_) => 0.0,
            _ => 0.5,
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, ClassifierError> {
        check_input(x, self.dim())?;
        Ok(match self {
            TrainedModel::Logreg(m) => m.score(x),
            TrainedModel::Gnb(m) => m.score(x),
            TrainedModel::Svm(m) => m.score(x),
            TrainedModel::RandomForest(m) => m.score(x),
        })
    }

    fn validate(&self) -> Result<(), String> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            TrainedModel::Logreg(m) => {
                if !finite(&m.weights) || !m.bias.is_finite() {
                    return Err("non-finite logistic regression parameter".into());
                }
            }
            TrainedModel::Svm(m) => {
                if !finite(&m.weights) || !m.bias.is_finite() {
                    return Err("non-finite SVM parameter".into());
                }
            }
            TrainedModel::Gnb(m) => m.validate()?,
            TrainedModel::RandomForest(m) => m.validate()?,
        }
        Ok(())
    }
}

/// Score `x` with `model`, labeling with the family's threshold (ties go to
/// `Machine`).
pub fn predict(model: &TrainedModel, x: &[f64]) -> Result<Prediction, ClassifierError> {
    let score = model.score(x)?;
    let label = if score >= model.threshold() {
        Label::Machine
    } else {
        Label::Human
    };
    Ok(Prediction { score, label })
}

/// Training settings for one family, as they appear in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    Logreg {
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_lr")]
        lr: f64,
    },
    Gnb {
        /// Fixed smoothing; when absent it is tuned by Bayesian optimization.
        #[serde(default)]
        var_smoothing: Option<f64>,
        #[serde(default = "default_budget")]
        tune_budget: usize,
    },
    Svm {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
    },
    RandomForest {
        #[serde(default = "default_trees")]
        n_trees: usize,
        #[serde(default = "default_depth")]
        max_depth: usize,
    },
}

fn default_l2() -> f64 {
    1e-4
}
fn default_epochs() -> usize {
    50
}
fn default_lr() -> f64 {
    0.1
}
fn default_budget() -> usize {
    15
}
fn default_lambda() -> f64 {
    1e-4
}
fn default_trees() -> usize {
    100
}
fn default_depth() -> usize {
    12
}

impl FamilyConfig {
    pub fn family(&self) -> &'static str {
        match self {
            FamilyConfig::Logreg { .. } => "logreg",
            FamilyConfig::Gnb { .. } => "gnb",
            FamilyConfig::Svm { .. } => "svm",
            FamilyConfig::RandomForest { .. } => "random_forest",
        }
    }

    pub fn train(&self, data: &Dataset, seed: u64) -> Result<TrainedModel, ClassifierError> {
        Ok(match *self {
            FamilyConfig::Logreg { l2, epochs, lr } => {
                TrainedModel::Logreg(train_logreg(data, l2, epochs, lr, seed)?)
            }
            FamilyConfig::Gnb {
                var_smoothing,
                tune_budget,
            } => {
                let smoothing = match var_smoothing {
                    Some(s) => s,
                    None => tune_gnb(data, tune_budget, seed)?.var_smoothing,
                };
                TrainedModel::Gnb(train_gnb(data, smoothing)?)
            }
            FamilyConfig::Svm { lambda, epochs } => {
                TrainedModel::Svm(train_linear_svm(data, lambda, epochs, seed)?)
            }
            FamilyConfig::RandomForest { n_trees, max_depth } => {
                TrainedModel::RandomForest(train_random_forest(data, n_trees, max_depth, seed)?)
            }
        })
    }
}

/// A trained model plus the feature standardization it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub model: TrainedModel,
    pub scaler: Option<Standardizer>,
}

impl Classifier {
    /// Fit a standardizer on `data`, then train `config` on the scaled rows.
    pub fn fit(data: &Dataset, config: &FamilyConfig, seed: u64) -> Result<Self, ClassifierError> {
        let scaler = Standardizer::fit(data);
        let scaled = scaler.transform_dataset(data);
        Ok(Self {
            model: config.train(&scaled, seed)?,
            scaler: Some(scaler),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifierError> {
        match &self.scaler {
            Some(s) => {
                check_input(x, s.mean.len())?;
                predict(&self.model, &s.transform(x))
            }
            None => predict(&self.model, x),
        }
    }

    pub fn to_json(&self) -> String {
        let mut value = serde_json::to_value(&self.model).expect("model serializes");
        let obj = value.as_object_mut().expect("tagged enum is an object");
        obj.insert("schema_version".into(), SCHEMA_VERSION.into());
        obj.insert("dim".into(), self.model.dim().into());
        if let Some(s) = &self.scaler {
            obj.insert("scaler".into(), serde_json::to_value(s).unwrap());
        }
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let fmt_err = |e: serde_json::Error| ClassifierError::Format(e.to_string());
        let mut value: Value = serde_json::from_str(text).map_err(fmt_err)?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| ClassifierError::Format("expected a JSON object".into()))?;
        let version = obj
            .remove("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ClassifierError::Format("missing schema_version".into()))?;
        if version != SCHEMA_VERSION {
            return Err(ClassifierError::SchemaVersion(version));
        }
        let dim = obj
            .get("dim")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ClassifierError::Format("missing dim".into()))? as usize;
        let scaler: Option<Standardizer> = match obj.remove("scaler") {
            Some(v) => Some(serde_json::from_value(v).map_err(fmt_err)?),
            None => None,
        };
        let model: TrainedModel = serde_json::from_value(value).map_err(fmt_err)?;
        model.validate().map_err(ClassifierError::Format)?;
        if model.dim() != dim {
            return Err(ClassifierError::Format(format!(
                "dim {dim} disagrees with parameters ({})",
                model.dim()
            )));
        }
        if let Some(s) = &scaler {
            if s.mean.len() != dim
                || s.scale.len() != dim
                || s.scale.iter().any(|v| !(v.is_finite() && *v > 0.0))
                || s.mean.iter().any(|v| !v.is_finite())
            {
                return Err(ClassifierError::Format("invalid scaler".into()));
            }
        }
        Ok(Self { model, scaler })
    }
}

pub fn save_model(model: &Classifier, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    let path = path.as_ref();
    fs::write(path, model.to_json()).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Classifier, ClassifierError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Classifier::from_json(&text)
}

/// Embedding features feeding a trained classifier.
pub struct EmbeddingClassifier<'a> {
    pub classifier: &'a Classifier,
    pub embeddings: &'a EmbeddingMatrix,
}

impl Detector for EmbeddingClassifier<'_> {
    fn method(&self) -> String {
        self.classifier.model.family().to_string()
    }

    fn threshold(&self) -> f64 {
        self.classifier.model.threshold()
    }

    fn score(&self, doc: &Document) -> Result<f64, BoxError> {
        let fv = doc_vector(&doc.body, self.embeddings);
        Ok(self.classifier.predict(&fv.values)?.score)
    }
}
