//! Log-loss, its soft-max smoothing `u`, the conjugate `u*`, and the
//! (smoothed) multiprototype surrogate objectives built from them.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_1p, xlogx};
use crate::matrix::{dot, Matrix};

/// Constraint violations up to this size are snapped onto the boundary
/// before `u*` is evaluated.
pub const CONJUGATE_SNAP: f64 = 1e-12;

/// Distance from the boundary at which `grad u*` is evaluated.
pub const CONJUGATE_INTERIOR: f64 = 1e-12;

/// `p x n` matrix whose rows are the prototypes `w_1 .. w_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMatrix(Matrix);

impl PrototypeMatrix {
    pub fn new(w: Matrix) -> Result<Self> {
        if w.rows() == 0 {
            return Err(Error::Empty("prototype matrix has no rows"));
        }
        if !w.is_finite() {
            return Err(Error::param("prototypes", "entries must be finite"));
        }
        Ok(PrototypeMatrix(w))
    }

    pub fn zeros(p: usize, n: usize) -> Self {
        PrototypeMatrix(Matrix::zeros(p.max(1), n))
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

impl Deref for PrototypeMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Maps every positive example to its dedicated prototype `j(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrototypeAssignment {
    of: Vec<Option<usize>>,
    prototypes: usize,
}

impl PrototypeAssignment {
    /// Validated assignment: defined exactly on the positive examples.
    pub fn new(d: &Dataset, of: Vec<Option<usize>>, prototypes: usize) -> Result<Self> {
        let a = Self::unchecked(of, prototypes)?;
        if a.of.len() != d.n_examples() {
            return Err(Error::DimensionMismatch {
                context: "assignment",
                expected: d.n_examples(),
                found: a.of.len(),
            });
        }
        for (i, (j, label)) in a.of.iter().zip(d.labels()).enumerate() {
            match (j, label) {
                (None, Label::Positive) => return Err(Error::MissingAssignment { index: i }),
                (Some(_), Label::Negative) => {
                    return Err(Error::InvalidDataset(alloc::format!(
                        "negative example {i} carries a prototype assignment"
                    )))
                }
                _ => {}
            }
        }
        Ok(a)
    }

    /// Only checks that prototype indices are in range.
    pub fn unchecked(of: Vec<Option<usize>>, prototypes: usize) -> Result<Self> {
        if prototypes == 0 {
            return Err(Error::param("p", "at least one prototype is required"));
        }
        if let Some(j) = of.iter().flatten().find(|&&j| j >= prototypes) {
            return Err(Error::param(
                "assignment",
                alloc::format!("prototype index {j} out of range for p = {prototypes}"),
            ));
        }
        Ok(PrototypeAssignment { of, prototypes })
    }

    /// Every positive example uses prototype 0.
    pub fn single(d: &Dataset) -> Self {
        let of = d
            .labels()
            .iter()
            .map(|l| (*l == Label::Positive).then_some(0))
            .collect();
        PrototypeAssignment { of, prototypes: 1 }
    }

    pub fn prototypes(&self) -> usize {
        self.prototypes
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.of.get(i).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.of
    }

    fn prototype_of(&self, i: usize) -> Result<usize> {
        self.get(i).ok_or(Error::MissingAssignment { index: i })
    }
}

/// `log(1 + exp(-z))`, stable for all finite `z`.
pub fn log_loss(z: f64) -> f64 {
    if z >= 0.0 {
        ln_1p(exp(-z))
    } else {
        -z + ln_1p(exp(z))
    }
}

/// Derivative of [`log_loss`]: `-1 / (1 + exp(z))`.
pub fn log_loss_derivative(z: f64) -> f64 {
    if z >= 0.0 {
        let e = exp(-z);
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + exp(z))
    }
}

/// Soft-max smoothing `u(t) = log(1 + sum_j exp(-t_j))` of `max_j log_loss(t_j)`.
pub fn softmax_u(t: &[f64]) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::Empty("softmax argument"));
    }
    // shift by the largest exponent, which is at least 0 for the implicit 1
    let shift = t.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
    let sum: f64 = exp(-shift) + t.iter().map(|&v| exp(-v - shift)).sum::<f64>();
    Ok(shift + ln(sum))
}

/// Gradient of `u` at `t`: `-exp(-t_j) / (1 + sum_c exp(-t_c))`.
///
/// This is also the dual point at which the Fenchel-Young inequality for
/// `u` and `u*` is tight.
pub fn softmax_u_grad(t: &[f64]) -> Vec<f64> {
    let shift = t.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
    let weights: Vec<f64> = t.iter().map(|&v| exp(-v - shift)).collect();
    let denom = exp(-shift) + weights.iter().sum::<f64>();
    weights.into_iter().map(|w| -w / denom).collect()
}

/// Convex conjugate of `u`:
/// `sum_j (-s_j) ln(-s_j) + (1 + 1's) ln(1 + 1's)` on `{s <= 0, 1's >= -1}`,
/// `+inf` elsewhere.
pub fn u_conjugate(s: &[f64]) -> f64 {
    let mut entropy = 0.0;
    let mut total = 0.0;
    for &v in s {
        if v.is_nan() || v > CONJUGATE_SNAP {
            return f64::INFINITY;
        }
        let v = v.min(0.0);
        entropy += xlogx(-v);
        total += v;
    }
    let slack = 1.0 + total;
    if slack < -CONJUGATE_SNAP {
        return f64::INFINITY;
    }
    entropy + xlogx(slack.max(0.0))
}

/// Gradient of `u*` with `s` pulled into the `delta`-interior:
/// `ln(1 + 1's) - ln(-s_j)`.
pub fn u_conjugate_grad(s: &[f64], out: &mut [f64]) {
    let slack = (1.0 + s.iter().sum::<f64>()).max(CONJUGATE_INTERIOR);
    let log_slack = ln(slack);
    for (o, &v) in out.iter_mut().zip(s) {
        *o = log_slack - ln((-v).max(CONJUGATE_INTERIOR));
    }
}

fn check_dims(w: &Matrix, d: &Dataset, a: &PrototypeAssignment) -> Result<()> {
    if w.cols() != d.n_features() {
        return Err(Error::DimensionMismatch {
            context: "prototype width",
            expected: d.n_features(),
            found: w.cols(),
        });
    }
    if a.prototypes() > w.rows() {
        return Err(Error::DimensionMismatch {
            context: "assignment prototypes",
            expected: w.rows(),
            found: a.prototypes(),
        });
    }
    Ok(())
}

/// Non-smooth surrogate `h(W)`: log-loss of the dedicated prototype on
/// positives plus `max_j log_loss(-w_j . x_i)` on negatives.
pub fn surrogate_loss(w: &PrototypeMatrix, d: &Dataset, a: &PrototypeAssignment) -> Result<f64> {
    check_dims(w, d, a)?;
    let mut total = 0.0;
    for i in 0..d.n_examples() {
        let x = d.x(i);
        total += match d.labels()[i] {
            Label::Positive => log_loss(dot(w.row(a.prototype_of(i)?), x)),
            Label::Negative => w
                .row_iter()
                .map(|r| log_loss(-dot(r, x)))
                .fold(f64::NEG_INFINITY, f64::max),
        };
    }
    Ok(total)
}

/// Smoothed surrogate `h~(W)`: negatives use `u(-W x_i)` instead of the max.
pub fn smoothed_loss(w: &PrototypeMatrix, d: &Dataset, a: &PrototypeAssignment) -> Result<f64> {
    check_dims(w, d, a)?;
    let mut total = 0.0;
    let mut t = vec![0.0; w.rows()];
    for i in 0..d.n_examples() {
        let x = d.x(i);
        total += match d.labels()[i] {
            Label::Positive => log_loss(dot(w.row(a.prototype_of(i)?), x)),
            Label::Negative => {
                for (tj, r) in t.iter_mut().zip(w.row_iter()) {
                    *tj = -dot(r, x);
                }
                softmax_u(&t)?
            }
        };
    }
    Ok(total)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be positive and finite"));
    }
    Ok(())
}

/// `(1/m) h~(W) + (lambda/2) ||W||_F^2`.
pub fn primal_objective(
    w: &PrototypeMatrix,
    d: &Dataset,
    a: &PrototypeAssignment,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    let loss = smoothed_loss(w, d, a)?;
    Ok(loss / d.n_examples() as f64 + 0.5 * lambda * w.frobenius_sq())
}

/// Gradient of [`primal_objective`] with respect to `W`.
pub fn primal_gradient(
    w: &PrototypeMatrix,
    d: &Dataset,
    a: &PrototypeAssignment,
    lambda: f64,
) -> Result<Matrix> {
    check_lambda(lambda)?;
    check_dims(w, d, a)?;
    let m = d.n_examples() as f64;
    let mut g = Matrix::zeros(w.rows(), w.cols());
    let mut t = vec![0.0; w.rows()];
    for i in 0..d.n_examples() {
        let x = d.x(i);
        match d.labels()[i] {
            Label::Positive => {
                let j = a.prototype_of(i)?;
                let coef = log_loss_derivative(dot(w.row(j), x)) / m;
                for (gv, xv) in g.row_mut(j).iter_mut().zip(x) {
                    *gv += coef * xv;
                }
            }
            Label::Negative => {
                for (tj, r) in t.iter_mut().zip(w.row_iter()) {
                    *tj = -dot(r, x);
                }
                // d u(-W x) / d w_j = -s_j x with s = grad u
                for (j, s) in softmax_u_grad(&t).into_iter().enumerate() {
                    let coef = -s / m;
                    for (gv, xv) in g.row_mut(j).iter_mut().zip(x) {
                        *gv += coef * xv;
                    }
                }
            }
        }
    }
    g.axpy(lambda, w);
    Ok(g)
}

/// Upper bound on the Lipschitz constant of [`primal_gradient`].
pub fn primal_lipschitz(d: &Dataset, lambda: f64) -> f64 {
    // Hessians of log_loss and u are bounded by 1/4 and 1/2 respectively.
    let sq: f64 = d
        .features()
        .row_iter()
        .map(|x| dot(x, x))
        .sum::<f64>();
    0.5 * sq / d.n_examples() as f64 + lambda
}

/// Number of training errors of `sign(max_j w_j . x)` (ties count as `-1`).
pub fn training_errors(w: &Matrix, d: &Dataset) -> usize {
    (0..d.n_examples())
        .filter(|&i| {
            let best = w
                .row_iter()
                .map(|r| dot(r, d.x(i)))
                .fold(f64::NEG_INFINITY, f64::max);
            let predicted = if best > 0.0 {
                Label::Positive
            } else {
                Label::Negative
            };
            predicted != d.labels()[i]
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    #[test]
    fn log_loss_values() {
        assert!((log_loss(0.0) - LN_2).abs() < 1e-15);
        // log(1 + e^-1) = 0.31326168751822283...
        assert!((log_loss(1.0) - 0.313_261_687_518_222_83).abs() < 1e-15);
        assert!((log_loss(-1000.0) - 1000.0).abs() < 1e-9);
        assert!(log_loss(1000.0) >= 0.0);
        assert!(log_loss(30.0) > 0.0);
    }

    #[test]
    fn softmax_values() {
        assert!((softmax_u(&[0.0, 0.0]).unwrap() - 3.0_f64.ln()).abs() < 1e-15);
        for z in [-50.0, -1.0, 0.3, 7.0, 800.0] {
            assert!((softmax_u(&[z]).unwrap() - log_loss(z)).abs() < 1e-12);
        }
        assert!(softmax_u(&[1000.0, 1000.0, 1000.0]).unwrap() < 1e-9);
        assert!((softmax_u(&[-1000.0, 0.0]).unwrap() - 1000.0).abs() < 1e-9);
        assert_eq!(softmax_u(&[]), Err(Error::Empty("softmax argument")));
    }

    #[test]
    fn conjugate_values() {
        assert_eq!(u_conjugate(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(u_conjugate(&[-1.0, 0.0, 0.0]), 0.0);
        assert!((u_conjugate(&[-0.5]) + LN_2).abs() < 1e-15);
        assert_eq!(u_conjugate(&[0.1, -0.2]), f64::INFINITY);
        assert_eq!(u_conjugate(&[-0.6, -0.6]), f64::INFINITY);
        // roundoff-sized violations are snapped
        assert!(u_conjugate(&[1e-13, -0.5]).is_finite());
        assert!(u_conjugate(&[-0.5, -0.5 - 1e-13]).is_finite());
    }

    #[test]
    fn conjugate_gradient_matches_differences() {
        let s = [-0.2, -0.3, -0.1];
        let mut g = [0.0; 3];
        u_conjugate_grad(&s, &mut g);
        let h = 1e-6;
        for j in 0..3 {
            let mut a = s;
            let mut b = s;
            a[j] += h;
            b[j] -= h;
            let fd = (u_conjugate(&a) - u_conjugate(&b)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6, "{j}: {fd} vs {}", g[j]);
        }
    }

    fn tiny() -> Dataset {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        Dataset::from_signs(x, &[1.0, -1.0, -1.0]).unwrap()
    }

    #[test]
    fn zero_prototypes() {
        let d = tiny();
        let a = PrototypeAssignment::single(&d);
        let w = PrototypeMatrix::zeros(1, 2);
        assert!((surrogate_loss(&w, &d, &a).unwrap() - 3.0 * LN_2).abs() < 1e-14);
        let w2 = PrototypeMatrix::zeros(2, 2);
        let a2 = PrototypeAssignment::new(&d, alloc::vec![Some(1), None, None], 2).unwrap();
        let expected = LN_2 + 2.0 * 3.0_f64.ln();
        assert!((smoothed_loss(&w2, &d, &a2).unwrap() - expected).abs() < 1e-14);
        let obj = primal_objective(&w2, &d, &a2, 0.1).unwrap();
        assert!((obj - expected / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_negative_example() {
        let x = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        let d = Dataset::from_signs(x, &[-1.0]).unwrap();
        let a = PrototypeAssignment::single(&d);
        let w = PrototypeMatrix::new(Matrix::from_rows(&[[-5.0, 0.0, 0.0]]).unwrap()).unwrap();
        // log(1 + e^-5) = 0.006715348489117967
        let h = surrogate_loss(&w, &d, &a).unwrap();
        assert!((h - 0.006_715_348_489_117_967).abs() < 1e-15);
        assert!((smoothed_loss(&w, &d, &a).unwrap() - h).abs() < 1e-15);
    }

    #[test]
    fn missing_assignment_reported() {
        let d = tiny();
        let a = PrototypeAssignment::unchecked(alloc::vec![None, None, None], 1).unwrap();
        let w = PrototypeMatrix::zeros(1, 2);
        assert_eq!(
            surrogate_loss(&w, &d, &a),
            Err(Error::MissingAssignment { index: 0 })
        );
        assert!(PrototypeAssignment::new(&d, alloc::vec![None, None, None], 1).is_err());
    }

    #[test]
    fn lambda_must_be_positive() {
        let d = tiny();
        let a = PrototypeAssignment::single(&d);
        let w = PrototypeMatrix::zeros(1, 2);
        assert!(primal_objective(&w, &d, &a, 0.0).is_err());
        assert!(primal_objective(&w, &d, &a, -1.0).is_err());
    }

    #[test]
    fn doubling_lambda_adds_half_norm() {
        let d = tiny();
        let a = PrototypeAssignment::single(&d);
        let w = PrototypeMatrix::new(Matrix::from_rows(&[[0.4, -1.3]]).unwrap()).unwrap();
        let lambda = 0.3;
        let f1 = primal_objective(&w, &d, &a, lambda).unwrap();
        let f2 = primal_objective(&w, &d, &a, 2.0 * lambda).unwrap();
        assert!((f2 - f1 - 0.5 * lambda * w.frobenius_sq()).abs() < 1e-15);
    }
}
