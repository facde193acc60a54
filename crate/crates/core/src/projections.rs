//! Euclidean projections onto the relaxed mask polytope and the dual sets.
//!
//! The mask polytope is a product of capped boxes
//! `E_j = { e in [0,1]^n : sum(e) <= k }`, one per prototype row. Projection
//! shifts the input by a scalar `lambda` and clips to the box; the shift is
//! found by bisection on the (monotone) clipped sum. The dual set of a
//! negative example, `{ s <= 0, sum(s) >= -1 }`, is handled the same way with
//! the shift applied in the opposite direction.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Result of a bisection-based projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub values: Vec<f64>,
    /// Number of bisection steps taken (0 when no search was needed).
    pub iterations: usize,
    /// Initial search bracket for the shift, when a search ran.
    pub bracket: Option<(f64, f64)>,
}

/// `ceil(log2((high - low) / tol)) + 1`, the most bisection steps a bracket
/// of that width can take.
pub fn iteration_bound(low: f64, high: f64, tol: f64) -> usize {
    let range = high - low;
    if range <= tol {
        return 1;
    }
    math::ceil(math::log2(range / tol)) as usize + 1
}

/// Bisection for the root of a non-increasing `residual`, given
/// `residual(low) >= 0 >= residual(high)`. Stops once `|residual| < tol` or
/// the bracket is narrower than `tol`; in the latter case `high` is returned.
fn bisect(mut low: f64, mut high: f64, tol: f64, mut residual: impl FnMut(f64) -> f64) -> (f64, usize) {
    let mut iterations = 0;
    while high - low > tol {
        let mid = 0.5 * (low + high);
        if mid <= low || mid >= high {
            break;
        }
        iterations += 1;
        let r = residual(mid);
        if r.abs() < tol {
            return (mid, iterations);
        }
        if r > 0.0 {
            low = mid;
        } else {
            high = mid;
        }
    }
    (high, iterations)
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::param("tol", "must be positive and finite"));
    }
    Ok(())
}

#[inline]
fn clip01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Projects `a` onto `{ e in [0,1]^n : sum(e) <= k }` and reports the search.
pub fn project_row_capped_box_traced(a: &[f64], k: usize, tol: f64) -> Result<Projection> {
    let n = a.len();
    if k < 1 || k > n {
        return Err(Error::param(
            "k",
            alloc::format!("budget {k} outside 1..={n}"),
        ));
    }
    check_tol(tol)?;
    let kf = k as f64;
    let clipped: Vec<f64> = a.iter().map(|&v| clip01(v)).collect();
    if clipped.iter().sum::<f64>() <= kf {
        return Ok(Projection {
            values: clipped,
            iterations: 0,
            bracket: None,
        });
    }
    let nf = n as f64;
    let clipped_sum = |lambda: f64| a.iter().map(|&v| clip01(v - lambda)).sum::<f64>();
    let mut low = (a.iter().sum::<f64>() - kf) / nf;
    let high = a.iter().copied().fold(f64::NEG_INFINITY, f64::max) - kf / nf;
    if clipped_sum(low) < kf {
        // Entries clipped at 1 can push the mean-shift bracket past the
        // root; every entry sits at or above k/n at this shift.
        low = a.iter().copied().fold(f64::INFINITY, f64::min) - kf / nf;
    }
    let (lambda, iterations) = bisect(low, high, tol, |l| clipped_sum(l) - kf);
    Ok(Projection {
        values: a.iter().map(|&v| clip01(v - lambda)).collect(),
        iterations,
        bracket: Some((low, high)),
    })
}

/// Euclidean projection of one mask row onto the capped box.
pub fn project_row_capped_box(a: &[f64], k: usize, tol: f64) -> Result<Vec<f64>> {
    project_row_capped_box_traced(a, k, tol).map(|p| p.values)
}

/// Row-wise projection of a `p x n` mask.
pub fn project_mask(eps: &Matrix, k: usize, tol: f64) -> Result<Matrix> {
    let mut out = eps.clone();
    project_mask_in_place(&mut out, eps.cols(), k, tol)?;
    Ok(out)
}

/// Projects the first `free_cols` entries of every row in place; the
/// remaining columns are left untouched.
pub fn project_mask_in_place(eps: &mut Matrix, free_cols: usize, k: usize, tol: f64) -> Result<()> {
    for j in 0..eps.rows() {
        let row = &mut eps.row_mut(j)[..free_cols];
        let projected = project_row_capped_box(row, k, tol)?;
        row.copy_from_slice(&projected);
    }
    Ok(())
}

/// Projection onto the dual set of a positive example assigned to
/// prototype `j`: `s_j` clamped to `[-1, 0]`, every other entry zero.
pub fn project_dual_positive(s: &[f64], j: usize) -> Vec<f64> {
    let mut out = s.to_vec();
    project_dual_positive_in_place(&mut out, j);
    out
}

pub fn project_dual_positive_in_place(s: &mut [f64], j: usize) {
    for (c, v) in s.iter_mut().enumerate() {
        *v = if c == j { v.clamp(-1.0, 0.0) } else { 0.0 };
    }
}

/// Projects `s` onto `{ s <= 0, sum(s) >= -1 }` and reports the search.
pub fn project_dual_negative_traced(s: &[f64], tol: f64) -> Result<Projection> {
    check_tol(tol)?;
    let clipped: Vec<f64> = s.iter().map(|&v| v.min(0.0)).collect();
    if clipped.iter().sum::<f64>() >= -1.0 {
        return Ok(Projection {
            values: clipped,
            iterations: 0,
            bracket: None,
        });
    }
    // s' = min(s + mu, 0) with the smallest mu >= 0 restoring sum(s') >= -1
    let shifted_sum = |mu: f64| s.iter().map(|&v| (v + mu).min(0.0)).sum::<f64>();
    let p = s.len() as f64;
    let low = ((-1.0 - s.iter().sum::<f64>()) / p).max(0.0);
    let high = -s.iter().copied().fold(f64::INFINITY, f64::min);
    let (mu, iterations) = bisect(low, high, tol, |mu| -1.0 - shifted_sum(mu));
    Ok(Projection {
        values: s.iter().map(|&v| (v + mu).min(0.0)).collect(),
        iterations,
        bracket: Some((low, high)),
    })
}

/// Euclidean projection onto the dual set of a negative example.
pub fn project_dual_negative(s: &[f64], tol: f64) -> Result<Vec<f64>> {
    project_dual_negative_traced(s, tol).map(|p| p.values)
}
