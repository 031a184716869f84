use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logreg::dot;
use super::{ClassifierError, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
}

impl SvmModel {
    /// Signed margin `w·x + b`.
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn sign(data: &Dataset, i: usize) -> f64 {
    if data.labels()[i].is_machine() {
        1.0
    } else {
        -1.0
    }
}

/// `lambda/2 * (|w|^2 + b^2) + mean hinge loss`. The bias is treated as the
/// weight of a constant feature and is regularized with the rest.
pub fn svm_objective(weights: &[f64], bias: f64, data: &Dataset, lambda: f64) -> f64 {
    let hinge: f64 = (0..data.len())
        .map(|i| (1.0 - sign(data, i) * (dot(weights, data.row(i)) + bias)).max(0.0))
        .sum();
    0.5 * lambda * (dot(weights, weights) + bias * bias) + hinge / data.len() as f64
}

/// Pegasos stochastic subgradient descent, one sample per step with step
/// size `1/(lambda t)`, followed by projection onto the ball of radius
/// `1/sqrt(lambda)`.
pub fn train_linear_svm(
    data: &Dataset,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<SvmModel, ClassifierError> {
    data.require_both_classes()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ClassifierError::InvalidParameter(format!(
            "lambda must be > 0, got {lambda}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = data.canonical_order();
    let mut w = vec![0.0; data.dim()];
    let mut b = 0.0;
    let radius = 1.0 / lambda.sqrt();
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = data.row(i);
            let y = sign(data, i);
            let margin = y * (dot(&w, x) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            b *= shrink;
            if margin < 1.0 {
                w.iter_mut().zip(x).for_each(|(v, xi)| *v += eta * y * xi);
                b += eta * y;
            }
            let norm = (dot(&w, &w) + b * b).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
                b *= s;
            }
        }
    }
    Ok(SvmModel {
        weights: w,
        bias: b,
        lambda,
    })
}
