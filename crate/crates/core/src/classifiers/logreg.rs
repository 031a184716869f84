use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, Dataset};

const BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
}

impl LogRegModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean negative log-likelihood plus `l2/2 * |w|^2` (bias unpenalized).
pub fn logreg_objective(weights: &[f64], bias: f64, data: &Dataset, l2: f64) -> f64 {
    let n = data.len() as f64;
    let nll: f64 = (0..data.len())
        .map(|i| {
            let z = dot(weights, data.row(i)) + bias;
            softplus(z) - data.target(i) * z
        })
        .sum();
    nll / n + 0.5 * l2 * dot(weights, weights)
}

/// Gradient of [`logreg_objective`] as `(d/dw, d/db)`.
pub fn logreg_gradient(weights: &[f64], bias: f64, data: &Dataset, l2: f64) -> (Vec<f64>, f64) {
    let idx: Vec<usize> = (0..data.len()).collect();
    batch_gradient(weights, bias, data, &idx, l2)
}

fn batch_gradient(
    weights: &[f64],
    bias: f64,
    data: &Dataset,
    batch: &[usize],
    l2: f64,
) -> (Vec<f64>, f64) {
    let m = batch.len() as f64;
    let mut gw: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut gb = 0.0;
    for &i in batch {
        let x = data.row(i);
        let err = sigmoid(dot(weights, x) + bias) - data.target(i);
        gw.iter_mut().zip(x).for_each(|(g, v)| *g += err * v / m);
        gb += err / m;
    }
    (gw, gb)
}

/// Seeded mini-batch gradient descent on the L2-regularized log-loss.
pub fn train_logreg(
    data: &Dataset,
    l2: f64,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<LogRegModel, ClassifierError> {
    data.require_both_classes()?;
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(ClassifierError::InvalidParameter(format!("l2 must be >= 0, got {l2}")));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(ClassifierError::InvalidParameter(format!("lr must be > 0, got {lr}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = data.canonical_order();
    let mut weights = vec![0.0; data.dim()];
    let mut bias = 0.0;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(BATCH_SIZE) {
            let (gw, gb) = batch_gradient(&weights, bias, data, batch, l2);
            weights.iter_mut().zip(&gw).for_each(|(w, g)| *w -= lr * g);
            bias -= lr * gb;
        }
    }
    Ok(LogRegModel { weights, bias, l2 })
}
