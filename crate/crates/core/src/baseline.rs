//! Sparse logistic-regression baselines: L1 or elastic-net log-loss fitted
//! by proximal gradient, then an L2 refit on the largest-weight features.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::losses::{log_loss, log_loss_derivative};
use crate::math::{ln, sqrt};
use crate::matrix::dot;

pub const MAX_ITER: usize = 5000;
pub const OBJECTIVE_TOL: f64 = 1e-9;
/// Consecutive objective increases treated as divergence.
pub const DIVERGENCE_WINDOW: usize = 100;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    /// `c ||w||_1`
    L1,
    /// `c ||w||_1 + (c/2) ||w||_2^2`
    ElasticNet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub penalty: Penalty,
    pub c: f64,
    /// L2 coefficient of the refit on the selected features.
    pub refit_l2: f64,
}

impl BaselineConfig {
    pub fn new(penalty: Penalty, c: f64) -> Self {
        BaselineConfig { penalty, c, refit_l2: 1e-2 }
    }
}

/// `w . x + b`, unregularized bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] != 0.0).collect()
    }

    pub fn nnz(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    /// Fraction of rows whose sign (0 counts as negative) matches the label.
    pub fn accuracy(&self, d: &Dataset) -> f64 {
        let correct = (0..d.n_examples())
            .filter(|&i| (self.decision(d.x(i)) > 0.0) == (d.y(i) > 0.0))
            .count();
        correct as f64 / d.n_examples() as f64
    }
}

/// `sign(v) max(|v| - tau, 0)`
pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// `(1/m) sum_i log(1 + exp(-y_i (w . x_i + b)))`
pub fn mean_log_loss(model: &LinearModel, d: &Dataset) -> f64 {
    let m = d.n_examples() as f64;
    (0..d.n_examples())
        .map(|i| log_loss(d.y(i) * model.decision(d.x(i))))
        .sum::<f64>()
        / m
}

/// Gradient of [`mean_log_loss`] as `(dw, db)`.
fn loss_gradient(model: &LinearModel, d: &Dataset) -> (Vec<f64>, f64) {
    let m = d.n_examples() as f64;
    let mut gw = vec![0.0; d.n_features()];
    let mut gb = 0.0;
    for i in 0..d.n_examples() {
        let y = d.y(i);
        let c = y * log_loss_derivative(y * model.decision(d.x(i))) / m;
        for (g, x) in gw.iter_mut().zip(d.x(i)) {
            *g += c * x;
        }
        gb += c;
    }
    (gw, gb)
}

pub fn penalized_objective(model: &LinearModel, d: &Dataset, cfg: &BaselineConfig) -> f64 {
    let l1: f64 = model.weights.iter().map(|w| w.abs()).sum();
    let l2: f64 = model.weights.iter().map(|w| w * w).sum();
    let penalty = match cfg.penalty {
        Penalty::L1 => cfg.c * l1,
        Penalty::ElasticNet => cfg.c * l1 + 0.5 * cfg.c * l2,
    };
    mean_log_loss(model, d) + penalty
}

/// Proximal-gradient minimization of the penalized log-loss from zero.
pub fn train_l1_logreg(d: &Dataset, cfg: &BaselineConfig) -> Result<LinearModel> {
    if !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(Error::param("c", "must be positive"));
    }
    let m = d.n_examples() as f64;
    // log-loss curvature is at most 1/4; the bias acts as a unit feature
    let spread: f64 = d.features().row_iter().map(|x| dot(x, x) + 1.0).sum::<f64>() / m;
    let smooth_l2 = match cfg.penalty {
        Penalty::L1 => 0.0,
        Penalty::ElasticNet => cfg.c,
    };
    let step = 1.0 / (0.25 * spread + smooth_l2);

    let mut model = LinearModel {
        weights: vec![0.0; d.n_features()],
        bias: 0.0,
    };
    let mut objective = penalized_objective(&model, d, cfg);
    let mut rising = 0;
    for iteration in 0..MAX_ITER {
        let (gw, gb) = loss_gradient(&model, d);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            let v = *w - step * (g + smooth_l2 * *w);
            *w = soft_threshold(v, step * cfg.c);
        }
        model.bias -= step * gb;
        let next = penalized_objective(&model, d, cfg);
        if !next.is_finite() {
            return Err(Error::Diverged { iterations: iteration + 1 });
        }
        if next > objective {
            rising += 1;
            if rising >= DIVERGENCE_WINDOW {
                return Err(Error::Diverged { iterations: iteration + 1 });
            }
        } else {
            rising = 0;
        }
        let change = (objective - next).abs();
        objective = next;
        if change < OBJECTIVE_TOL {
            break;
        }
    }
    Ok(model)
}

/// Indices of the `budget` largest `|w|`, lower index first on ties, sorted.
pub fn top_features(weights: &[f64], budget: usize) -> Result<Vec<usize>> {
    if budget == 0 {
        return Err(Error::param("budget", "must be at least 1"));
    }
    if budget > weights.len() {
        return Err(Error::param(
            "budget",
            format!("{budget} exceeds the {} features", weights.len()),
        ));
    }
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].abs().total_cmp(&weights[a].abs()).then(a.cmp(&b)));
    idx.truncate(budget);
    idx.sort_unstable();
    Ok(idx)
}

/// Keeps the `budget` largest-magnitude weights and refits an L2-regularized
/// logistic regression (unregularized bias) on those features only.
pub fn retrain_top_features(
    d: &Dataset,
    weights: &[f64],
    budget: usize,
    l2: f64,
) -> Result<LinearModel> {
    if weights.len() != d.n_features() {
        return Err(Error::DimensionMismatch {
            context: "baseline weights",
            expected: d.n_features(),
            found: weights.len(),
        });
    }
    let support = top_features(weights, budget)?;
    let fitted = l2_logreg(d, &support, l2)?;
    let mut full = vec![0.0; d.n_features()];
    for (&c, w) in support.iter().zip(&fitted[..support.len()]) {
        full[c] = *w;
    }
    Ok(LinearModel {
        weights: full,
        bias: fitted[support.len()],
    })
}

/// Newton's method with backtracking for
/// `(1/m) sum log-loss + (l2/2) ||w||^2` over the columns in `support`.
/// Returns the weights followed by the bias.
fn l2_logreg(d: &Dataset, support: &[usize], l2: f64) -> Result<Vec<f64>> {
    let dim = support.len() + 1;
    let m = d.n_examples() as f64;
    let rows: Vec<Vec<f64>> = (0..d.n_examples())
        .map(|i| {
            let x = d.x(i);
            let mut r: Vec<f64> = support.iter().map(|&c| x[c]).collect();
            r.push(1.0);
            r
        })
        .collect();
    let objective = |theta: &[f64]| {
        let loss: f64 = rows
            .iter()
            .enumerate()
            .map(|(i, r)| log_loss(d.y(i) * dot(r, theta)))
            .sum::<f64>()
            / m;
        loss + 0.5 * l2 * theta[..dim - 1].iter().map(|t| t * t).sum::<f64>()
    };
    let mut theta = vec![0.0; dim];
    let mut value = objective(&theta);
    for _ in 0..NEWTON_MAX_ITER {
        let mut grad = vec![0.0; dim];
        let mut hess = vec![0.0; dim * dim];
        for (i, r) in rows.iter().enumerate() {
            let y = d.y(i);
            let z = y * dot(r, &theta);
            let g = y * log_loss_derivative(z) / m;
            let prob = -log_loss_derivative(z);
            let h = prob * (1.0 - prob) / m;
            for a in 0..dim {
                grad[a] += g * r[a];
                for b in 0..dim {
                    hess[a * dim + b] += h * r[a] * r[b];
                }
            }
        }
        for a in 0..dim - 1 {
            grad[a] += l2 * theta[a];
            hess[a * dim + a] += l2;
        }
        // keeps the bias direction invertible on separable data
        hess[dim * dim - 1] += 1e-12;
        if grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs())) < NEWTON_TOL {
            break;
        }
        let dir = solve_spd(&hess, &grad, dim)?;
        let slope: f64 = -dot(&grad, &dir);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(a, b)| a - t * b).collect();
            let v = objective(&trial);
            if v <= value + 1e-4 * t * slope || t < 1e-10 {
                theta = trial;
                value = v;
                break;
            }
            t *= 0.5;
        }
        if t < 1e-10 {
            break;
        }
    }
    Ok(theta)
}

/// Cholesky solve of `A x = b` for symmetric positive definite `A`.
fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let v = a[i * n + i] - s;
                if v <= 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "hessian",
                        reason: format!("not positive definite at pivot {i}"),
                    });
                }
                l[i * n + i] = sqrt(v);
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Ok(x)
}

/// Bias of the best constant predictor, `log(|I+| / |I-|)`.
pub fn constant_bias(d: &Dataset) -> f64 {
    let pos = d.positives().count() as f64;
    let neg = d.negatives().count() as f64;
    ln(pos / neg)
}
