use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bayesopt::{maximize_1d, BoConfig};
use super::{ClassifierError, Dataset};
use crate::eval::{confusion, threshold_labels};
use crate::ingest::Label;

const LOG10_RANGE: (f64, f64) = (-12.0, 0.0);

/// Maximum-likelihood Gaussian for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGaussian {
    pub prior: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl ClassGaussian {
    fn fit(data: &Dataset, label: Label) -> Self {
        let rows: Vec<&[f64]> = (0..data.len())
            .filter(|&i| data.labels()[i] == label)
            .map(|i| data.row(i))
            .collect();
        let (mean, var) = moments(&rows, data.dim());
        Self {
            prior: rows.len() as f64 / data.len() as f64,
            mean,
            var,
        }
    }

    fn log_likelihood(&self, x: &[f64], epsilon: f64) -> f64 {
        let mut ll = self.prior.ln();
        for ((v, m), s) in x.iter().zip(&self.mean).zip(&self.var) {
            let s = s + epsilon;
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / s);
        }
        ll
    }
}

fn moments(rows: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        var.iter_mut()
            .zip(r.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub human: ClassGaussian,
    pub machine: ClassGaussian,
    /// Relative smoothing, as tuned.
    pub var_smoothing: f64,
    /// Absolute amount added to every variance: `var_smoothing` times the
    /// largest per-feature variance of the training data.
    pub epsilon: f64,
}

impl GnbModel {
    pub fn dim(&self) -> usize {
        self.human.mean.len()
    }

    /// Posterior probability of `Machine`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let d = self.machine.log_likelihood(x, self.epsilon)
            - self.human.log_likelihood(x, self.epsilon);
        if d >= 0.0 {
            1.0 / (1.0 + (-d).exp())
        } else {
            let e = d.exp();
            e / (1.0 + e)
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        let dim = self.dim();
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err("GNB epsilon must be positive".into());
        }
        for c in [&self.human, &self.machine] {
            if c.mean.len() != dim || c.var.len() != dim {
                return Err("GNB parameter arrays differ in length".into());
            }
            if c.mean.iter().chain(&c.var).any(|v| !v.is_finite()) || c.var.iter().any(|v| *v < 0.0) {
                return Err("invalid GNB mean or variance".into());
            }
            if !(c.prior > 0.0 && c.prior < 1.0) {
                return Err("GNB priors must lie in (0, 1)".into());
            }
        }
        if (self.human.prior + self.machine.prior - 1.0).abs() > 1e-9 {
            return Err("GNB priors must sum to 1".into());
        }
        Ok(())
    }
}

pub fn train_gnb(data: &Dataset, var_smoothing: f64) -> Result<GnbModel, ClassifierError> {
    if !(var_smoothing > 0.0 && var_smoothing.is_finite()) {
        return Err(ClassifierError::InvalidParameter(format!(
            "var_smoothing must be > 0, got {var_smoothing}"
        )));
    }
    data.require_both_classes()?;
    let rows: Vec<&[f64]> = data.features().iter().map(|r| r.as_slice()).collect();
    let (_, overall_var) = moments(&rows, data.dim());
    let max_var = overall_var.iter().copied().fold(0.0, f64::max);
    let scale = if max_var > 0.0 { max_var } else { 1.0 };
    Ok(GnbModel {
        human: ClassGaussian::fit(data, Label::Human),
        machine: ClassGaussian::fit(data, Label::Machine),
        var_smoothing,
        epsilon: var_smoothing * scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub var_smoothing: f64,
    pub validation_f1: f64,
    /// `(log10 smoothing, validation F1)` in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Stratified 80/20 split of row indices: `(train, validation)`.
fn stratified_holdout(data: &Dataset, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let order = data.canonical_order();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for label in [Label::Human, Label::Machine] {
        let mut idx: Vec<usize> = order.iter().copied().filter(|&i| data.labels()[i] == label).collect();
        idx.shuffle(rng);
        let n_val = if idx.len() >= 2 {
            crate::ingest::floor_fraction(0.2, idx.len()).max(1)
        } else {
            0
        };
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    (train, val)
}

/// Choose `var_smoothing` by Bayesian optimization of validation F1 over
/// `log10(var_smoothing)` in `[-12, 0]`.
pub fn tune_gnb(data: &Dataset, budget: usize, seed: u64) -> Result<TuneResult, ClassifierError> {
    let config = BoConfig::new(budget, seed);
    if budget < config.n_init {
        return Err(ClassifierError::InvalidParameter(format!(
            "tuning budget must be at least {}, got {budget}",
            config.n_init
        )));
    }
    data.require_both_classes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train_idx, val_idx) = stratified_holdout(data, &mut rng);
    let train = data.subset(&train_idx);
    let val = data.subset(&val_idx);
    train.require_both_classes()?;
    if val.is_empty() {
        return Err(ClassifierError::InvalidParameter(
            "too few samples for a validation split".into(),
        ));
    }

    let mut failure = None;
    let objective = |log_s: f64| -> f64 {
        let model = match train_gnb(&train, 10f64.powf(log_s)) {
            Ok(m) => m,
            Err(e) => {
                failure.get_or_insert(e);
                return 0.0;
            }
        };
        let scores: Vec<f64> = val.features().iter().map(|x| model.score(x)).collect();
        let preds = threshold_labels(&scores, 0.5);
        confusion(&preds, val.labels()).map(|cm| cm.f1()).unwrap_or(0.0)
    };
    let result = tune_var_smoothing(objective, budget, seed)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result)
}

/// The search behind [`tune_gnb`] with an arbitrary objective over
/// `log10(var_smoothing)` in `[-12, 0]`.
pub fn tune_var_smoothing<F>(objective: F, budget: usize, seed: u64) -> Result<TuneResult, ClassifierError>
where
    F: FnMut(f64) -> f64,
{
    let config = BoConfig::new(budget, seed);
    let result = maximize_1d(objective, LOG10_RANGE.0, LOG10_RANGE.1, &config)?;
    let log_s = result.best_x.clamp(LOG10_RANGE.0, LOG10_RANGE.1);
    Ok(TuneResult {
        var_smoothing: 10f64.powf(log_s).clamp(1e-12, 1.0),
        validation_f1: result.best_y,
        evaluations: result.evaluations,
    })
}
