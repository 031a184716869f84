//! One-dimensional Bayesian optimization: a Gaussian-process surrogate with
//! a squared-exponential kernel and expected-improvement acquisition over a
//! fixed candidate grid.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::ClassifierError;

const NOISE: f64 = 1e-6;
const LENGTH_SCALES: [f64; 5] = [0.02, 0.05, 0.1, 0.2, 0.4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    /// Total objective evaluations, including the initial points.
    pub budget: usize,
    pub n_init: usize,
    pub grid_points: usize,
    /// Exploration margin in expected improvement (standardized units).
    pub xi: f64,
    pub seed: u64,
}

impl BoConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            n_init: 5,
            grid_points: 100,
            xi: 0.01,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoResult {
    pub best_x: f64,
    pub best_y: f64,
    /// `(x, y)` in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
}

struct Gp {
    xs: Vec<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    length: f64,
}

fn kernel(a: f64, b: f64, length: f64) -> f64 {
    let d = a - b;
    (-d * d / (2.0 * length * length)).exp()
}

impl Gp {
    /// Fit to standardized targets; returns the fit and its log marginal
    /// likelihood.
    fn fit(xs: &[f64], ys: &DVector<f64>, length: f64) -> Option<(Self, f64)> {
        let n = xs.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel(xs[i], xs[j], length) + if i == j { NOISE } else { 0.0 }
        });
        let chol = k.cholesky()?;
        let alpha = chol.solve(ys);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        let lml = -0.5 * ys.dot(&alpha)
            - log_det
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        Some((
            Self {
                xs: xs.to_vec(),
                chol,
                alpha,
                length,
            },
            lml,
        ))
    }

    fn predict(&self, x: f64) -> (f64, f64) {
        let ks = DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().map(|&xi| kernel(xi, x, self.length)),
        );
        let mean = ks.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .unwrap_or_else(|| DVector::zeros(ks.len()));
        let var = (1.0 - v.dot(&v)).max(0.0);
        (mean, var.sqrt())
    }
}

fn expected_improvement(mean: f64, sd: f64, best: f64, xi: f64, normal: &Normal) -> f64 {
    let imp = mean - best - xi;
    if sd <= 1e-12 {
        return imp.max(0.0);
    }
    let z = imp / sd;
    imp * normal.cdf(z) + sd * normal.pdf(z)
}

/// Maximize `objective` over `[lo, hi]`. The best observed point is
/// returned; ties keep the earliest evaluation.
pub fn maximize_1d<F>(
    mut objective: F,
    lo: f64,
    hi: f64,
    config: &BoConfig,
) -> Result<BoResult, ClassifierError>
where
    F: FnMut(f64) -> f64,
{
    if config.n_init == 0 || config.budget < config.n_init {
        return Err(ClassifierError::InvalidParameter(format!(
            "budget must be at least {}, got {}",
            config.n_init, config.budget
        )));
    }
    if !(lo < hi) || config.grid_points < 2 {
        return Err(ClassifierError::InvalidParameter("empty search interval".into()));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evals: Vec<(f64, f64)> = Vec::with_capacity(config.budget);
    let mut eval = |x: f64, evals: &mut Vec<(f64, f64)>| -> Result<(), ClassifierError> {
        let y = objective(x);
        if !y.is_finite() {
            return Err(ClassifierError::InvalidParameter(format!(
                "objective returned {y} at {x}"
            )));
        }
        evals.push((x, y));
        Ok(())
    };
    for _ in 0..config.n_init {
        let x = rng.random_range(lo..=hi);
        eval(x, &mut evals)?;
    }

    let step = (hi - lo) / (config.grid_points - 1) as f64;
    let grid: Vec<f64> = (0..config.grid_points).map(|i| lo + step * i as f64).collect();
    let mut used = vec![false; grid.len()];
    let range = hi - lo;

    while evals.len() < config.budget {
        let xs: Vec<f64> = evals.iter().map(|e| e.0).collect();
        let raw: Vec<f64> = evals.iter().map(|e| e.1).collect();
        let n = raw.len() as f64;
        let mu = raw.iter().sum::<f64>() / n;
        let sd = (raw.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / n).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        let ys = DVector::from_iterator(raw.len(), raw.iter().map(|y| (y - mu) / sd));
        let best = ys.max();

        let gp = LENGTH_SCALES
            .iter()
            .filter_map(|f| Gp::fit(&xs, &ys, f * range))
            .fold(None::<(Gp, f64)>, |acc, (gp, lml)| match acc {
                Some((_, best_lml)) if best_lml >= lml => acc,
                _ => Some((gp, lml)),
            });
        let Some((gp, _)) = gp else {
            break;
        };

        let mut pick: Option<(usize, f64)> = None;
        for (i, &g) in grid.iter().enumerate() {
            if used[i] {
                continue;
            }
            let (m, s) = gp.predict(g);
            let ei = expected_improvement(m, s, best, config.xi, &normal);
            if pick.is_none_or(|(_, e)| ei > e) {
                pick = Some((i, ei));
            }
        }
        let Some((i, _)) = pick else {
            break;
        };
        used[i] = true;
        eval(grid[i], &mut evals)?;
    }

    let (best_x, best_y) = evals
        .iter()
        .copied()
        .fold(None::<(f64, f64)>, |acc, e| match acc {
            Some(a) if a.1 >= e.1 => Some(a),
            _ => Some(e),
        })
        .expect("at least one evaluation");
    Ok(BoResult {
        best_x,
        best_y,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_below_initial_points_rejected() {
        assert!(maximize_1d(|x| x, 0.0, 1.0, &BoConfig::new(4, 0)).is_err());
    }

    #[test]
    fn flat_objective_returns_first_evaluation() {
        let r = maximize_1d(|_| 0.3, -12.0, 0.0, &BoConfig::new(8, 1)).unwrap();
        assert_eq!(r.evaluations.len(), 8);
        assert_eq!(r.best_x, r.evaluations[0].0);
    }

    #[test]
    fn finds_planted_peak_within_one_grid_step() {
        let (lo, hi) = (-12.0, 0.0);
        let step = (hi - lo) / 99.0;
        for (peak, seed) in [(-7.3, 0), (-1.2, 1), (-10.5, 2)] {
            let f = |x: f64| -(x - peak) * (x - peak);
            let grid_best = (0..100)
                .map(|i| lo + step * i as f64)
                .max_by(|a, b| f(*a).total_cmp(&f(*b)))
                .unwrap();
            let r = maximize_1d(f, lo, hi, &BoConfig::new(15, seed)).unwrap();
            assert!(
                (r.best_x - grid_best).abs() <= step + 1e-12,
                "peak {peak}: got {} vs {grid_best}",
                r.best_x
            );
        }
    }

    #[test]
    fn deterministic() {
        let f = |x: f64| (x * 0.7).sin();
        let a = maximize_1d(f, -12.0, 0.0, &BoConfig::new(10, 3)).unwrap();
        let b = maximize_1d(f, -12.0, 0.0, &BoConfig::new(10, 3)).unwrap();
        assert_eq!(a, b);
    }
}
