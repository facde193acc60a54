//! Extragradient (Mirror-Prox) training of sparse multiprototype models.
//!
//! Each iteration takes a projected gradient half-step from `(eps_t, S_t)`
//! to `(eps^_t, S^_t)`, then restarts from `(eps_t, S_t)` using the
//! gradients at the half-step point. The half-step iterates are averaged;
//! the averaged mask is rounded to its `k` largest entries per row and the
//! prototypes are recovered in closed form from the averaged duals.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::cluster;
use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::losses::{primal_gradient, primal_objective, PrototypeAssignment, PrototypeMatrix};
use crate::math::sqrt;
use crate::matrix::{dot, Matrix};
use crate::model::{ModelMetadata, TrainedModel};
use crate::projections::{self, DEFAULT_TOL};
use crate::saddle::{self, DualSet, GradientMode, Polarity, SaddleProblem};

/// Iterations between non-finite checks.
pub const NAN_GUARD_EVERY: usize = 50;
/// Projected ascent steps used by [`estimate_gap`].
pub const GAP_ASCENT_STEPS: usize = 100;
const REFIT_MAX_ITER: usize = 20_000;
const REFIT_GRAD_TOL: f64 = 1e-10;
const DUAL_FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    /// Non-zero budget per prototype.
    pub k: usize,
    /// Number of prototypes.
    pub p: usize,
    /// Mask step size.
    pub alpha: f64,
    /// Dual step size.
    pub beta: f64,
    pub iterations: usize,
    /// Projection tolerance.
    pub tol: f64,
    pub seed: u64,
    pub gradient_mode: GradientMode,
    /// Re-optimize the smoothed primal on the rounded support.
    pub refit: bool,
    /// Give every prototype an always-selected bias term.
    pub intercept: bool,
    /// Iterations between trace records; 0 records only the final state.
    pub checkpoint_every: usize,
    /// Include [`estimate_gap`] in trace records.
    pub trace_gap: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.1,
            k: 3,
            p: 2,
            alpha: 0.01,
            beta: 0.001,
            iterations: 2000,
            tol: DEFAULT_TOL,
            seed: 0,
            gradient_mode: GradientMode::Consistent,
            refit: false,
            intercept: false,
            checkpoint_every: 0,
            trace_gap: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lambda) {
            return Err(Error::param("lambda", "must be positive"));
        }
        if !positive(self.alpha) {
            return Err(Error::param("alpha", "must be positive"));
        }
        if !positive(self.beta) {
            return Err(Error::param("beta", "must be positive"));
        }
        if !positive(self.tol) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.p == 0 {
            return Err(Error::param("p", "at least one prototype is required"));
        }
        if self.k < 1 || self.k > n_features {
            return Err(Error::param(
                "k",
                format!("budget {} outside 1..={n_features}", self.k),
            ));
        }
        Ok(())
    }

    /// Factor applied to `alpha` and `beta`. Consistent-mode gradients carry
    /// an extra `1/m` relative to the reduced-form ones; scaling by `m` makes
    /// the solver step on `m * phi`, which has the same saddle points, so one
    /// step-size grid serves both modes.
    pub fn step_scale(&self, m: usize) -> f64 {
        match self.gradient_mode {
            GradientMode::Consistent => m as f64,
            GradientMode::Reduced => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Primal objective of the model recovered from the running averages.
    pub objective: f64,
    pub gap: Option<f64>,
    /// Frobenius norm of the last mask update.
    pub mask_step: f64,
    /// Frobenius norm of the last dual update.
    pub dual_step: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    /// Non-fatal adjustments, e.g. a reduced prototype count.
    pub warnings: Vec<String>,
}

impl SolverTrace {
    /// Tab-separated rows `iteration objective gap mask_step dual_step` with a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("iteration\tobjective\tgap\tmask_step\tdual_step\n");
        for r in &self.records {
            let gap = r.gap.map_or(String::from("NA"), |g| format!("{g:e}"));
            let _ = writeln!(
                out,
                "{}\t{:e}\t{}\t{:e}\t{:e}",
                r.iteration, r.objective, gap, r.mask_step, r.dual_step
            );
        }
        out
    }
}

/// Starting point of the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct InitState {
    pub eps: Matrix,
    pub duals: DualSet,
    pub assignment: PrototypeAssignment,
    /// Prototype count after reduction to the number of positives.
    pub prototypes: usize,
    pub warnings: Vec<String>,
}

/// Clusters the positives into `p` groups and builds a feasible start.
///
/// The mask starts uniform at `min(1, k/n)`; positive duals at `-1/2` on
/// their own prototype, negative duals at `-1/(2p)` everywhere. With
/// `cfg.intercept` the mask has one extra column fixed at 1.
pub fn init_state(d: &Dataset, cfg: &SolverConfig) -> Result<InitState> {
    let positives: Vec<usize> = d.positives().collect();
    if positives.is_empty() {
        return Err(Error::InvalidDataset(String::from("no positive examples")));
    }
    if d.negatives().next().is_none() {
        return Err(Error::InvalidDataset(String::from("no negative examples")));
    }
    let mut warnings = Vec::new();
    let mut p = cfg.p;
    if p > positives.len() {
        warnings.push(format!(
            "p = {p} exceeds the {} positive examples; using p = {}",
            positives.len(),
            positives.len()
        ));
        p = positives.len();
    }
    let pos_points = Matrix::from_rows(&positives.iter().map(|&i| d.x(i)).collect::<Vec<_>>())?;
    let clusters = cluster::kmeans(&pos_points, p, cluster::DEFAULT_MAX_ITER, cfg.seed)?;
    let mut of = vec![None; d.n_examples()];
    for (&i, &c) in positives.iter().zip(&clusters.labels) {
        of[i] = Some(c);
    }
    let assignment = PrototypeAssignment::new(d, of, p)?;
    let mut init = init_with_assignment(d, cfg, assignment)?;
    init.warnings = warnings;
    Ok(init)
}

/// Feasible start for a caller-supplied assignment of positives to prototypes.
pub fn init_with_assignment(d: &Dataset, cfg: &SolverConfig, assignment: PrototypeAssignment) -> Result<InitState> {
    if d.negatives().next().is_none() {
        return Err(Error::InvalidDataset(String::from("no negative examples")));
    }
    let p = assignment.prototypes();
    let n = d.n_features();
    let fixed = usize::from(cfg.intercept);
    let start = (cfg.k as f64 / n as f64).min(1.0);
    let mut eps = Matrix::filled(p, n + fixed, start);
    for j in 0..p {
        for c in n..n + fixed {
            eps[(j, c)] = 1.0;
        }
    }

    let polarity = Polarity::from_assignment(d, &assignment)?;
    let mut duals = DualSet::zeros(polarity, p)?;
    for i in 0..d.n_examples() {
        match duals.polarity()[i] {
            Polarity::Positive { prototype } => duals.dual_mut(i)[prototype] = -0.5,
            Polarity::Negative => duals.dual_mut(i).fill(-1.0 / (2.0 * p as f64)),
        }
    }
    Ok(InitState {
        eps,
        duals,
        assignment,
        prototypes: p,
        warnings: Vec::new(),
    })
}

/// Sets the `k` largest entries of each row to 1 and the rest to 0; ties go
/// to the lower column index.
pub fn round_mask(eps: &Matrix, k: usize) -> Matrix {
    let mut out = Matrix::zeros(eps.rows(), eps.cols());
    for j in 0..eps.rows() {
        for c in top_k(eps.row(j), k) {
            out[(j, c)] = 1.0;
        }
    }
    out
}

/// Indices of the `k` largest values, lower index first on ties.
fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k.min(values.len()));
    idx
}

/// Binary mask minimizing the linear-in-eps `phi(., S)` over the relaxed
/// polytope: per row, the `k` free columns with the most negative gradient.
pub fn minimizing_mask(s: &DualSet, prob: &SaddleProblem<'_>) -> Result<Matrix> {
    let n = prob.data().n_features();
    let free = prob.free_cols();
    let probe = Matrix::filled(s.prototypes(), n, 1.0);
    let grad = saddle::grad_eps(&probe, s, prob)?;
    let mut eps = Matrix::zeros(s.prototypes(), n);
    for j in 0..s.prototypes() {
        let neg: Vec<f64> = grad.row(j)[..free].iter().map(|g| -g).collect();
        for c in top_k(&neg, prob.k()) {
            eps[(j, c)] = 1.0;
        }
        for c in free..n {
            eps[(j, c)] = 1.0;
        }
    }
    Ok(eps)
}

/// Duality-gap estimate `max_S' phi(eps, S') - min_eps' phi(eps', S)`.
///
/// The minimum is exact. The maximum is approximated by
/// [`GAP_ASCENT_STEPS`] monotone projected-ascent steps from `S`, so the
/// estimate is never negative and never overstates the true gap.
pub fn estimate_gap(eps: &Matrix, s: &DualSet, prob: &SaddleProblem<'_>, tol: f64) -> Result<f64> {
    let lower = saddle::phi_value(&minimizing_mask(s, prob)?, s, prob)?;
    let upper = ascend_duals(eps, s, prob, GAP_ASCENT_STEPS, tol)?.1;
    Ok(upper - lower)
}

/// Monotone projected gradient ascent on `phi(eps, .)` with an adaptive step.
pub fn ascend_duals(
    eps: &Matrix,
    s: &DualSet,
    prob: &SaddleProblem<'_>,
    steps: usize,
    tol: f64,
) -> Result<(DualSet, f64)> {
    let mut current = s.clone();
    let mut value = saddle::phi_value(eps, &current, prob)?;
    let mut step = match prob.mode() {
        GradientMode::Consistent => prob.data().n_examples() as f64,
        GradientMode::Reduced => 1.0,
    };
    for _ in 0..steps {
        let grad = saddle::grad_duals(eps, &current, prob)?;
        let mut candidate = current.clone();
        candidate.values_mut().axpy(step, &grad);
        candidate.project(tol)?;
        let v = saddle::phi_value(eps, &candidate, prob)?;
        if v > value {
            current = candidate;
            value = v;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    Ok((current, value))
}

/// Full output of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// `p x n` prototype weights (intercept column removed).
    pub weights: Matrix,
    /// Per-prototype bias; all zero without an intercept.
    pub bias: Vec<f64>,
    /// Rounded binary mask over the free feature columns.
    pub mask: Matrix,
    /// Averaged relaxed mask (including a fixed intercept column, if any).
    pub eps_average: Matrix,
    pub duals_average: DualSet,
    pub assignment: PrototypeAssignment,
    /// Primal objective of the final model.
    pub objective: f64,
    pub trace: SolverTrace,
}

impl Solution {
    /// The prototypes with the bias appended as a last column, matching the
    /// layout used during training with an intercept.
    pub fn augmented_weights(&self) -> Matrix {
        join_bias(&self.weights, &self.bias)
    }
}

fn join_bias(w: &Matrix, bias: &[f64]) -> Matrix {
    let (p, n) = w.shape();
    let mut out = Matrix::zeros(p, n + 1);
    for j in 0..p {
        out.row_mut(j)[..n].copy_from_slice(w.row(j));
        out[(j, n)] = bias[j];
    }
    out
}

struct Averager {
    eps: Matrix,
    duals: Matrix,
    alpha_total: f64,
    beta_total: f64,
}

impl Averager {
    fn new(eps: &Matrix, duals: &Matrix) -> Self {
        Averager {
            eps: Matrix::zeros(eps.rows(), eps.cols()),
            duals: Matrix::zeros(duals.rows(), duals.cols()),
            alpha_total: 0.0,
            beta_total: 0.0,
        }
    }

    fn add(&mut self, alpha: f64, eps: &Matrix, beta: f64, duals: &Matrix) {
        self.eps.axpy(alpha, eps);
        self.duals.axpy(beta, duals);
        self.alpha_total += alpha;
        self.beta_total += beta;
    }

    fn current(&self) -> (Matrix, Matrix) {
        let mut e = self.eps.clone();
        e.scale(1.0 / self.alpha_total);
        let mut d = self.duals.clone();
        d.scale(1.0 / self.beta_total);
        (e, d)
    }
}

fn fix_columns(eps: &mut Matrix, free: usize) {
    for j in 0..eps.rows() {
        eps.row_mut(j)[free..].fill(1.0);
    }
}

fn frobenius_diff(a: &Matrix, b: &Matrix) -> f64 {
    sqrt(
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum(),
    )
}

/// Rounds the averaged mask, recovers `W`, and optionally refits.
fn finish(
    eps_avg: &Matrix,
    duals_avg: &DualSet,
    prob: &SaddleProblem<'_>,
    assignment: &PrototypeAssignment,
    refit: bool,
) -> Result<(Matrix, Matrix, f64)> {
    let free = prob.free_cols();
    let (p, n) = eps_avg.shape();
    let mut free_part = Matrix::zeros(p, free);
    for j in 0..p {
        free_part.row_mut(j).copy_from_slice(&eps_avg.row(j)[..free]);
    }
    let rounded = round_mask(&free_part, prob.k());
    let mut full = Matrix::filled(p, n, 1.0);
    for j in 0..p {
        full.row_mut(j)[..free].copy_from_slice(rounded.row(j));
    }
    let mut w = saddle::recover_w(&full, duals_avg, prob)?;
    if refit {
        w = refit_support(&w, &full, prob.data(), assignment, prob.lambda())?;
    }
    let objective = primal_objective(&PrototypeMatrix::new(w.clone())?, prob.data(), assignment, prob.lambda())?;
    Ok((w, rounded, objective))
}

/// Gradient descent on the smoothed primal objective with every weight
/// outside `support` held at zero.
pub fn refit_support(
    start: &Matrix,
    support: &Matrix,
    d: &Dataset,
    a: &PrototypeAssignment,
    lambda: f64,
) -> Result<Matrix> {
    // Lipschitz bound of the restricted gradient: Hessians of the log-loss
    // and of u are at most 1/2 in spectral norm.
    let m = d.n_examples() as f64;
    let mut widest: f64 = 0.0;
    for j in 0..support.rows() {
        let mask = support.row(j);
        let total: f64 = d
            .features()
            .row_iter()
            .map(|x| x.iter().zip(mask).map(|(v, e)| v * v * e).sum::<f64>())
            .sum();
        widest = widest.max(total);
    }
    let step = 1.0 / (0.5 * widest / m + lambda);

    let mut w = start.hadamard(support);
    for _ in 0..REFIT_MAX_ITER {
        let g = primal_gradient(&PrototypeMatrix::new(w.clone())?, d, a, lambda)?.hadamard(support);
        if g.max_abs() <= REFIT_GRAD_TOL {
            break;
        }
        w.axpy(-step, &g);
    }
    Ok(w)
}

fn check_finite(t: usize, eps: &Matrix, duals: &DualSet) -> Result<()> {
    if !eps.is_finite() {
        return Err(Error::NonFinite { iteration: t, block: "mask" });
    }
    if !duals.values().is_finite() {
        return Err(Error::NonFinite { iteration: t, block: "duals" });
    }
    Ok(())
}

fn check_feasible(t: usize, eps: &Matrix, duals: &DualSet, prob: &SaddleProblem<'_>, tol: f64) -> Result<()> {
    let free = prob.free_cols();
    let k = prob.k() as f64;
    for j in 0..eps.rows() {
        let row = &eps.row(j)[..free];
        let box_violation = row
            .iter()
            .map(|&v| (-v).max(v - 1.0).max(0.0))
            .fold(0.0, f64::max);
        let budget_violation = row.iter().sum::<f64>() - k - tol;
        let violation = box_violation.max(budget_violation);
        if violation > 0.0 {
            return Err(Error::Infeasible { iteration: t, block: "mask", violation });
        }
    }
    let violation = duals.max_violation();
    if violation > DUAL_FEASIBILITY_TOL {
        return Err(Error::Infeasible { iteration: t, block: "duals", violation });
    }
    Ok(())
}

/// Runs the extragradient solver on (already standardized) data.
pub fn solve(d: &Dataset, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate(d.n_features())?;
    run(d, cfg, init_state(d, cfg)?)
}

/// [`solve`] with a fixed assignment of positives to prototypes instead of
/// clustering; `cfg.p` is ignored in favour of `assignment.prototypes()`.
pub fn solve_with_assignment(d: &Dataset, cfg: &SolverConfig, assignment: PrototypeAssignment) -> Result<Solution> {
    cfg.validate(d.n_features())?;
    run(d, cfg, init_with_assignment(d, cfg, assignment)?)
}

fn run(d: &Dataset, cfg: &SolverConfig, init: InitState) -> Result<Solution> {
    let work = if cfg.intercept { d.with_intercept() } else { d.clone() };
    let fixed = usize::from(cfg.intercept);
    let prob = SaddleProblem::with_fixed_columns(&work, cfg.lambda, cfg.k, cfg.gradient_mode, fixed)?;
    let free = prob.free_cols();
    let scale = cfg.step_scale(d.n_examples());
    let (alpha, beta) = (cfg.alpha * scale, cfg.beta * scale);
    let tol = cfg.tol;

    let mut eps = init.eps;
    let mut duals = init.duals;
    let mut trace = SolverTrace {
        records: Vec::new(),
        warnings: init.warnings,
    };
    let mut avg = Averager::new(&eps, duals.values());

    let half_step = |eps: &Matrix, duals: &DualSet, g_eps: &Matrix, g_duals: &Matrix| -> Result<(Matrix, DualSet)> {
        let mut e = eps.clone();
        e.axpy(-alpha, g_eps);
        projections::project_mask_in_place(&mut e, free, cfg.k, tol)?;
        fix_columns(&mut e, free);
        let mut s = duals.clone();
        s.values_mut().axpy(beta, g_duals);
        s.project(tol)?;
        Ok((e, s))
    };

    for t in 0..=cfg.iterations {
        let (g_eps, g_duals) = saddle::gradients(&eps, &duals, &prob)?;
        let (eps_hat, duals_hat) = half_step(&eps, &duals, &g_eps, &g_duals)?;
        let (g_eps_hat, g_duals_hat) = saddle::gradients(&eps_hat, &duals_hat, &prob)?;
        let (eps_next, duals_next) = half_step(&eps, &duals, &g_eps_hat, &g_duals_hat)?;

        if t >= 1 || cfg.iterations == 0 {
            avg.add(cfg.alpha, &eps_hat, cfg.beta, duals_hat.values());
        }
        let mask_step = frobenius_diff(&eps_next, &eps);
        let dual_step = frobenius_diff(duals_next.values(), duals.values());
        eps = eps_next;
        duals = duals_next;

        if t % NAN_GUARD_EVERY == 0 || t == cfg.iterations {
            check_finite(t, &eps, &duals)?;
        }
        let checkpoint = t == cfg.iterations
            || (cfg.checkpoint_every > 0 && t > 0 && t % cfg.checkpoint_every == 0);
        if checkpoint {
            check_feasible(t, &eps, &duals, &prob, tol)?;
            let (e_avg, s_avg) = avg.current();
            let s_avg = DualSet::new(s_avg, duals.polarity().to_vec())?;
            let (_, _, objective) = finish(&e_avg, &s_avg, &prob, &init.assignment, false)?;
            let gap = if cfg.trace_gap {
                Some(estimate_gap(&e_avg, &s_avg, &prob, tol)?)
            } else {
                None
            };
            trace.records.push(TraceRecord {
                iteration: t,
                objective,
                gap,
                mask_step,
                dual_step,
            });
        }
    }

    let (eps_average, s_avg) = avg.current();
    let duals_average = DualSet::new(s_avg, duals.polarity().to_vec())?;
    let (w, mask, objective) = finish(&eps_average, &duals_average, &prob, &init.assignment, cfg.refit)?;
    let n = d.n_features();
    let p = w.rows();
    let mut weights = Matrix::zeros(p, n);
    let mut bias = vec![0.0; p];
    for j in 0..p {
        weights.row_mut(j).copy_from_slice(&w.row(j)[..n]);
        if cfg.intercept {
            bias[j] = w[(j, n)];
        }
    }
    Ok(Solution {
        weights,
        bias,
        mask,
        eps_average,
        duals_average,
        assignment: init.assignment,
        objective,
        trace,
    })
}

/// Trains on already standardized data; the model carries an identity
/// standardizer.
pub fn train(d: &Dataset, cfg: &SolverConfig) -> Result<(TrainedModel, SolverTrace)> {
    let solution = solve(d, cfg)?;
    let model = TrainedModel::new(
        solution.weights,
        solution.bias,
        Standardizer::identity(d.n_features()),
        d.feature_names().to_vec(),
        cfg.clone(),
        ModelMetadata {
            seed: cfg.seed,
            iterations: cfg.iterations,
            objective: solution.objective,
        },
    )?;
    Ok((model, solution.trace))
}

/// Standardizes raw data, trains, and embeds the fitted standardizer.
pub fn fit(raw: &Dataset, cfg: &SolverConfig) -> Result<(TrainedModel, SolverTrace)> {
    let standardizer = Standardizer::fit(raw);
    let d = standardizer.apply(raw)?;
    let (model, trace) = train(&d, cfg)?;
    Ok((model.with_standardizer(standardizer)?, trace))
}

/// Fraction of examples in `d` whose sign-of-max prediction matches the label.
pub fn accuracy(weights: &Matrix, bias: &[f64], d: &Dataset) -> f64 {
    let correct = (0..d.n_examples())
        .filter(|&i| {
            let best = weights
                .row_iter()
                .zip(bias)
                .map(|(r, b)| dot(r, d.x(i)) + b)
                .fold(f64::NEG_INFINITY, f64::max);
            (best > 0.0) == (d.y(i) > 0.0)
        })
        .count();
    correct as f64 / d.n_examples() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;

    fn blobs() -> Dataset {
        // positives around (+-2, 2), negatives around (0, -2)
        let rows = [
            [2.0, 2.1, 0.1],
            [2.2, 1.8, -0.2],
            [-2.1, 2.0, 0.0],
            [-1.9, 2.2, 0.3],
            [0.1, -2.0, 0.1],
            [-0.2, -1.9, -0.1],
            [0.3, -2.2, 0.2],
            [0.0, -1.7, -0.3],
        ];
        let signs = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
        Dataset::from_signs(Matrix::from_rows(&rows).unwrap(), &signs).unwrap()
    }

    #[test]
    fn init_with_single_prototype() {
        let d = blobs();
        let cfg = SolverConfig { p: 1, k: 3, ..SolverConfig::default() };
        let init = init_state(&d, &cfg).unwrap();
        assert!(d.positives().all(|i| init.assignment.get(i) == Some(0)));
        assert!(init.eps.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn init_is_feasible() {
        let d = blobs();
        let cfg = SolverConfig { p: 2, k: 2, ..SolverConfig::default() };
        let init = init_state(&d, &cfg).unwrap();
        let mut projected = init.duals.clone();
        projected.project(DEFAULT_TOL).unwrap();
        assert_eq!(projected, init.duals);
        let mask = projections::project_mask(&init.eps, 2, DEFAULT_TOL).unwrap();
        assert_eq!(mask, init.eps);
        // the two positive blobs land in different clusters
        assert_ne!(init.assignment.get(0), init.assignment.get(2));
        assert_eq!(init.assignment.get(0), init.assignment.get(1));
    }

    #[test]
    fn prototype_count_reduced_with_warning() {
        let d = blobs();
        let cfg = SolverConfig { p: 9, ..SolverConfig::default() };
        let init = init_state(&d, &cfg).unwrap();
        assert_eq!(init.prototypes, 4);
        assert_eq!(init.warnings.len(), 1);
    }

    #[test]
    fn needs_both_classes() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let d = Dataset::from_signs(x.clone(), &[-1.0, -1.0]).unwrap();
        assert!(init_state(&d, &SolverConfig { k: 1, ..SolverConfig::default() }).is_err());
        let d = Dataset::from_signs(x, &[1.0, 1.0]).unwrap();
        assert!(init_state(&d, &SolverConfig { k: 1, ..SolverConfig::default() }).is_err());
    }

    #[test]
    fn rounding_rules() {
        let r = round_mask(&Matrix::from_rows(&[[0.9, 0.1, 0.5]]).unwrap(), 2);
        assert_eq!(r.as_slice(), &[1.0, 0.0, 1.0]);
        let r = round_mask(&Matrix::from_rows(&[[0.5, 0.5, 0.5]]).unwrap(), 1);
        assert_eq!(r.as_slice(), &[1.0, 0.0, 0.0]);
        let b = Matrix::from_rows(&[[0.0, 1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(round_mask(&b, 2), b);
        let r = round_mask(&Matrix::from_rows(&[[0.2, 0.3]]).unwrap(), 5);
        assert_eq!(r.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn zero_iterations_uses_first_half_step() {
        let d = blobs();
        let cfg = SolverConfig { iterations: 0, k: 2, ..SolverConfig::default() };
        let sol = solve(&d, &cfg).unwrap();
        let init = init_state(&d, &cfg).unwrap();
        let prob = SaddleProblem::new(&d, cfg.lambda, cfg.k, cfg.gradient_mode).unwrap();
        let scale = cfg.step_scale(d.n_examples());
        let (ge, gs) = saddle::gradients(&init.eps, &init.duals, &prob).unwrap();
        let mut e = init.eps.clone();
        e.axpy(-cfg.alpha * scale, &ge);
        let e = projections::project_mask(&e, cfg.k, cfg.tol).unwrap();
        let mut s = init.duals.clone();
        s.values_mut().axpy(cfg.beta * scale, &gs);
        s.project(cfg.tol).unwrap();
        let mask = round_mask(&e, cfg.k);
        let w = saddle::recover_w(&mask, &s, &prob).unwrap();
        for (a, b) in sol.weights.as_slice().iter().zip(w.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn learns_two_blobs_with_sparse_support() {
        let d = blobs();
        let cfg = SolverConfig { k: 2, iterations: 300, checkpoint_every: 50, ..SolverConfig::default() };
        let sol = solve(&d, &cfg).unwrap();
        assert_eq!(accuracy(&sol.weights, &sol.bias, &d), 1.0);
        for j in 0..sol.weights.rows() {
            let nnz = sol.weights.row(j).iter().filter(|v| **v != 0.0).count();
            assert!(nnz <= 2);
            for (w, e) in sol.weights.row(j).iter().zip(sol.mask.row(j)) {
                assert!(*e == 1.0 || *w == 0.0);
            }
        }
        assert_eq!(sol.trace.records.len(), 6);
        assert!(sol.trace.records.windows(2).all(|w| w[0].iteration < w[1].iteration));
        assert!(sol.trace.to_tsv().lines().count() == 7);
    }

    #[test]
    fn deterministic() {
        let d = blobs();
        let cfg = SolverConfig { k: 2, iterations: 100, ..SolverConfig::default() };
        assert_eq!(solve(&d, &cfg).unwrap(), solve(&d, &cfg).unwrap());
    }

    #[test]
    fn exploding_steps_reported() {
        let d = blobs();
        let cfg = SolverConfig { k: 2, alpha: 1e300, beta: 1e300, iterations: 60, ..SolverConfig::default() };
        // huge steps either stay feasible through projection or fail loudly
        match solve(&d, &cfg) {
            Ok(sol) => assert!(sol.weights.is_finite()),
            Err(e) => assert!(matches!(e, Error::NonFinite { .. } | Error::Infeasible { .. })),
        }
    }

    #[test]
    fn intercept_bias_recovered() {
        let d = blobs();
        let cfg = SolverConfig { k: 2, iterations: 200, intercept: true, ..SolverConfig::default() };
        let sol = solve(&d, &cfg).unwrap();
        assert_eq!(sol.bias.len(), sol.weights.rows());
        assert_eq!(sol.eps_average.cols(), 4);
        assert!(sol.eps_average.row_iter().all(|r| r[3] == 1.0));
        assert_eq!(d.count(Label::Positive), 4);
    }
}
