//! The saddle-point form of the sparse multiprototype objective.
//!
//! With one dual vector `s_i` per example, the smoothed regularized loss of
//! the masked prototypes `W . eps` (entrywise product) equals the maximum
//! over feasible duals of
//!
//! ```text
//! Phi(W, eps, S) = (1/m) sum_i ( y_i s_i' (W . eps) x_i - u*(s_i) ) + (lambda/2) ||W||_F^2
//! ```
//!
//! Writing `M = sum_i y_i s_i x_i'`, the inner minimum over `W` is attained at
//! `W = -(1/(m lambda)) M . eps`, which leaves a function `phi(eps, S)` that is
//! linear in a binary (or relaxed) mask and concave in the duals.
//!
//! Duals are stored example-major: row `i` of [`DualSet::values`] is `s_i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::losses::{u_conjugate, u_conjugate_grad, PrototypeAssignment, CONJUGATE_INTERIOR};
use crate::math::ln;
use crate::matrix::{dot, Matrix};
use crate::projections;

/// Which closed forms `phi` and its gradients use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// Exact elimination of `W`: `phi = -(1/(2 m^2 lambda)) <M.M, eps> - (1/m) sum u*(s_i)`,
    /// with gradients that include the `grad u*` term.
    #[default]
    Consistent,
    /// The reduced form `-(1/(m lambda)) <M.M, eps> - sum u*(s_i)` and the
    /// gradients `-(1/(m lambda)) M.M` and `-(1/(m lambda)) y_i (M.eps) x_i`.
    Reduced,
}

/// Which dual set an example's `s_i` lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// `s_i` is zero except entry `prototype`, which lies in `[-1, 0]`.
    Positive { prototype: usize },
    /// `s_i <= 0` and `sum(s_i) >= -1`.
    Negative,
}

impl Polarity {
    pub fn from_assignment(d: &Dataset, a: &PrototypeAssignment) -> Result<Vec<Polarity>> {
        d.labels()
            .iter()
            .enumerate()
            .map(|(i, l)| match l {
                Label::Positive => a
                    .get(i)
                    .map(|prototype| Polarity::Positive { prototype })
                    .ok_or(Error::MissingAssignment { index: i }),
                Label::Negative => Ok(Polarity::Negative),
            })
            .collect()
    }
}

/// The duals `S`, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSet {
    values: Matrix,
    polarity: Vec<Polarity>,
}

impl DualSet {
    pub fn new(values: Matrix, polarity: Vec<Polarity>) -> Result<Self> {
        if values.rows() != polarity.len() {
            return Err(Error::DimensionMismatch {
                context: "dual polarity",
                expected: values.rows(),
                found: polarity.len(),
            });
        }
        for pol in &polarity {
            if let Polarity::Positive { prototype } = pol {
                if *prototype >= values.cols() {
                    return Err(Error::param("polarity", "prototype index out of range"));
                }
            }
        }
        Ok(DualSet { values, polarity })
    }

    pub fn zeros(polarity: Vec<Polarity>, p: usize) -> Result<Self> {
        DualSet::new(Matrix::zeros(polarity.len(), p), polarity)
    }

    #[inline]
    pub fn examples(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn prototypes(&self) -> usize {
        self.values.cols()
    }

    /// `s_i`.
    #[inline]
    pub fn dual(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    #[inline]
    pub fn dual_mut(&mut self, i: usize) -> &mut [f64] {
        self.values.row_mut(i)
    }

    pub fn polarity(&self) -> &[Polarity] {
        &self.polarity
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Matrix {
        &mut self.values
    }

    /// Projects every `s_i` onto its own feasible set.
    pub fn project(&mut self, tol: f64) -> Result<()> {
        for i in 0..self.examples() {
            match self.polarity[i] {
                Polarity::Positive { prototype } => {
                    projections::project_dual_positive_in_place(self.values.row_mut(i), prototype)
                }
                Polarity::Negative => {
                    let projected = projections::project_dual_negative(self.values.row(i), tol)?;
                    self.values.row_mut(i).copy_from_slice(&projected);
                }
            }
        }
        Ok(())
    }

    /// Largest constraint violation over all columns (0 when feasible).
    pub fn max_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, pol) in self.polarity.iter().enumerate() {
            let s = self.values.row(i);
            match *pol {
                Polarity::Positive { prototype } => {
                    for (j, &v) in s.iter().enumerate() {
                        let viol = if j == prototype {
                            (v - 0.0).max(-1.0 - v).max(0.0)
                        } else {
                            v.abs()
                        };
                        worst = worst.max(viol);
                    }
                }
                Polarity::Negative => {
                    for &v in s {
                        worst = worst.max(v);
                    }
                    worst = worst.max(-1.0 - s.iter().sum::<f64>());
                }
            }
        }
        worst
    }
}

/// Data, regularization and budget defining `phi`.
#[derive(Debug, Clone, Copy)]
pub struct SaddleProblem<'a> {
    data: &'a Dataset,
    lambda: f64,
    k: usize,
    mode: GradientMode,
    fixed_cols: usize,
}

impl<'a> SaddleProblem<'a> {
    pub fn new(data: &'a Dataset, lambda: f64, k: usize, mode: GradientMode) -> Result<Self> {
        Self::with_fixed_columns(data, lambda, k, mode, 0)
    }

    /// The last `fixed_cols` feature columns are always selected: their mask
    /// entries stay at 1 and do not count against `k`. Used for an intercept.
    pub fn with_fixed_columns(
        data: &'a Dataset,
        lambda: f64,
        k: usize,
        mode: GradientMode,
        fixed_cols: usize,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", "must be positive and finite"));
        }
        if fixed_cols >= data.n_features() {
            return Err(Error::param("fixed_cols", "no free feature columns left"));
        }
        let free = data.n_features() - fixed_cols;
        if k < 1 || k > free {
            return Err(Error::param("k", alloc::format!("budget {k} outside 1..={free}")));
        }
        Ok(SaddleProblem {
            data,
            lambda,
            k,
            mode,
            fixed_cols,
        })
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> GradientMode {
        self.mode
    }

    pub fn free_cols(&self) -> usize {
        self.data.n_features() - self.fixed_cols
    }

    pub fn fixed_cols(&self) -> usize {
        self.fixed_cols
    }

    fn m(&self) -> f64 {
        self.data.n_examples() as f64
    }

    fn check(&self, eps: &Matrix, s: &DualSet) -> Result<()> {
        let (m, n) = (self.data.n_examples(), self.data.n_features());
        if eps.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "mask width",
                expected: n,
                found: eps.cols(),
            });
        }
        if s.examples() != m {
            return Err(Error::DimensionMismatch {
                context: "dual count",
                expected: m,
                found: s.examples(),
            });
        }
        if eps.rows() != s.prototypes() {
            return Err(Error::DimensionMismatch {
                context: "mask rows",
                expected: s.prototypes(),
                found: eps.rows(),
            });
        }
        Ok(())
    }

    fn conjugate_sum(&self, s: &DualSet) -> f64 {
        (0..s.examples()).map(|i| u_conjugate(s.dual(i))).sum()
    }

    /// Coefficient `c` in `phi = c <M.M, eps> - d sum u*` and the `d`.
    fn phi_coefficients(&self) -> (f64, f64) {
        let (m, lambda) = (self.m(), self.lambda);
        match self.mode {
            GradientMode::Consistent => (-1.0 / (2.0 * m * m * lambda), 1.0 / m),
            GradientMode::Reduced => (-1.0 / (m * lambda), 1.0),
        }
    }
}

/// `M = sum_i y_i s_i x_i'`, a `p x n` matrix.
pub fn aggregate_m(s: &DualSet, d: &Dataset) -> Result<Matrix> {
    if s.examples() != d.n_examples() {
        return Err(Error::DimensionMismatch {
            context: "dual count",
            expected: d.n_examples(),
            found: s.examples(),
        });
    }
    let mut agg = Matrix::zeros(s.prototypes(), d.n_features());
    for i in 0..d.n_examples() {
        let y = d.y(i);
        let x = d.x(i);
        for (j, &sij) in s.dual(i).iter().enumerate() {
            let coef = y * sij;
            if coef != 0.0 {
                for (a, xv) in agg.row_mut(j).iter_mut().zip(x) {
                    *a += coef * xv;
                }
            }
        }
    }
    Ok(agg)
}

/// `Phi(W, eps, S)`. Infeasible duals make it `-inf` (the conjugate is `+inf`).
pub fn big_phi(w: &Matrix, eps: &Matrix, s: &DualSet, prob: &SaddleProblem<'_>) -> Result<f64> {
    prob.check(eps, s)?;
    if w.shape() != eps.shape() {
        return Err(Error::DimensionMismatch {
            context: "prototype shape",
            expected: eps.cols(),
            found: w.cols(),
        });
    }
    let agg = aggregate_m(s, prob.data)?;
    let coupling: f64 = w
        .as_slice()
        .iter()
        .zip(eps.as_slice())
        .zip(agg.as_slice())
        .map(|((w, e), a)| w * e * a)
        .sum();
    let m = prob.m();
    Ok((coupling - prob.conjugate_sum(s)) / m + 0.5 * prob.lambda * w.frobenius_sq())
}

/// The unique minimizer of `Phi` over `W`: `-(1/(m lambda)) M . eps`.
pub fn recover_w(eps: &Matrix, s: &DualSet, prob: &SaddleProblem<'_>) -> Result<Matrix> {
    prob.check(eps, s)?;
    let mut w = aggregate_m(s, prob.data)?.hadamard(eps);
    w.scale(-1.0 / (prob.m() * prob.lambda));
    Ok(w)
}

/// `phi(eps, S)` in the problem's [`GradientMode`].
pub fn phi_value(eps: &Matrix, s: &DualSet, prob: &SaddleProblem<'_>) -> Result<f64> {
    prob.check(eps, s)?;
    let agg = aggregate_m(s, prob.data)?;
    Ok(phi_from_aggregate(&agg, eps, s, prob))
}

fn phi_from_aggregate(agg: &Matrix, eps: &Matrix, s: &DualSet, prob: &SaddleProblem<'_>) -> f64 {
    let (quad, conj) = prob.phi_coefficients();
    let weighted: f64 = agg
        .as_slice()
        .iter()
        .zip(eps.as_slice())
        .map(|(a, e)| a * a * e)
        .sum();
    quad * weighted - conj * prob.conjugate_sum(s)
}

/// `grad_eps phi` (a `p x n` matrix, all entries `<= 0`). Entries of fixed
/// columns are reported too; callers that hold them at 1 ignore them.
pub fn grad_eps(eps: &Matrix, s: &DualSet, prob: &SaddleProblem<'_>) -> Result<Matrix> {
    prob.check(eps, s)?;
    let agg = aggregate_m(s, prob.data)?;
    Ok(grad_eps_from_aggregate(&agg, prob))
}

fn grad_eps_from_aggregate(agg: &Matrix, prob: &SaddleProblem<'_>) -> Matrix {
    let (quad, _) = prob.phi_coefficients();
    agg.map(|a| quad * a * a)
}

/// `grad_{s_i} phi` for every example, stored like [`DualSet::values`].
///
/// For a positive example only the entry of its own prototype carries the
/// `grad u*` term, since the rest of `s_i` is pinned at zero.
pub fn grad_duals(eps: &Matrix, s: &DualSet, prob: &SaddleProblem<'_>) -> Result<Matrix> {
    prob.check(eps, s)?;
    let agg = aggregate_m(s, prob.data)?;
    Ok(grad_duals_from_aggregate(&agg, eps, s, prob))
}

fn grad_duals_from_aggregate(
    agg: &Matrix,
    eps: &Matrix,
    s: &DualSet,
    prob: &SaddleProblem<'_>,
) -> Matrix {
    let (m, lambda) = (prob.m(), prob.lambda);
    let (quad_coef, conj_coef) = match prob.mode {
        GradientMode::Consistent => (-1.0 / (m * m * lambda), Some(1.0 / m)),
        GradientMode::Reduced => (-1.0 / (m * lambda), None),
    };
    let masked = agg.hadamard(eps);
    let p = s.prototypes();
    let mut out = Matrix::zeros(s.examples(), p);
    let mut conj_grad = vec![0.0; p];
    for i in 0..s.examples() {
        let x = prob.data.x(i);
        let y = prob.data.y(i);
        let row = out.row_mut(i);
        for (g, mrow) in row.iter_mut().zip(masked.row_iter()) {
            *g = quad_coef * y * dot(mrow, x);
        }
        if let Some(c) = conj_coef {
            match s.polarity()[i] {
                Polarity::Positive { prototype } => {
                    let beta = s.dual(i)[prototype];
                    let g = ln((1.0 + beta).max(CONJUGATE_INTERIOR))
                        - ln((-beta).max(CONJUGATE_INTERIOR));
                    row[prototype] -= c * g;
                }
                Polarity::Negative => {
                    u_conjugate_grad(s.dual(i), &mut conj_grad);
                    for (r, g) in row.iter_mut().zip(&conj_grad) {
                        *r -= c * g;
                    }
                }
            }
        }
    }
    out
}

/// `phi` and both partial gradients at one point, sharing one pass over the data.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub grad_eps: Matrix,
    pub grad_duals: Matrix,
}

pub fn evaluate(eps: &Matrix, s: &DualSet, prob: &SaddleProblem<'_>) -> Result<Evaluation> {
    prob.check(eps, s)?;
    let agg = aggregate_m(s, prob.data)?;
    Ok(Evaluation {
        value: phi_from_aggregate(&agg, eps, s, prob),
        grad_eps: grad_eps_from_aggregate(&agg, prob),
        grad_duals: grad_duals_from_aggregate(&agg, eps, s, prob),
    })
}

/// Both gradients without the objective value.
pub fn gradients(eps: &Matrix, s: &DualSet, prob: &SaddleProblem<'_>) -> Result<(Matrix, Matrix)> {
    prob.check(eps, s)?;
    let agg = aggregate_m(s, prob.data)?;
    Ok((
        grad_eps_from_aggregate(&agg, prob),
        grad_duals_from_aggregate(&agg, eps, s, prob),
    ))
}
