//! Grid cross-validation, repeated holdout evaluation, and baseline wiring.

use std::fmt::Write;

use rayon::prelude::*;
use small_core::baseline::{self, BaselineConfig, LinearModel};
use small_core::{solver, Dataset, SolverConfig, Standardizer, TrainedModel};

use crate::data::{make_splits, split_data, DataError, SplitPlan};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Core(#[from] small_core::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// A fitted model that can be scored on raw (unstandardized) data.
pub trait Classifier {
    fn accuracy(&self, d: &Dataset) -> Result<f64>;
    /// Selected features, counted with multiplicity across prototypes.
    fn feature_count(&self) -> usize;
}

impl Classifier for TrainedModel {
    fn accuracy(&self, d: &Dataset) -> Result<f64> {
        Ok(TrainedModel::accuracy(self, d)?)
    }

    fn feature_count(&self) -> usize {
        self.sparsity_report().total
    }
}

/// A linear baseline bundled with the standardizer fitted on its training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedLinear {
    pub standardizer: Standardizer,
    pub model: LinearModel,
}

impl Classifier for StandardizedLinear {
    fn accuracy(&self, d: &Dataset) -> Result<f64> {
        Ok(self.model.accuracy(&self.standardizer.apply(d)?))
    }

    fn feature_count(&self) -> usize {
        self.model.nnz()
    }
}

/// Number of features kept when a baseline is retrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Half of the features, rounded down, at least one.
    Half,
    Fixed(usize),
}

impl Budget {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            Budget::Half => (n / 2).max(1),
            Budget::Fixed(b) => b.min(n),
        }
    }
}

/// Standardizes, trains SMaLL, and embeds the standardizer.
pub fn fit_small(train: &Dataset, cfg: &SolverConfig) -> Result<TrainedModel> {
    Ok(solver::fit(train, cfg)?.0)
}

/// Standardizes, fits the sparse baseline, keeps the largest weights within
/// the budget, and refits on them. Features with zero sparse weight are never
/// selected, so the budget is also capped by the sparse fit's support.
pub fn fit_baseline(train: &Dataset, cfg: &BaselineConfig, budget: Budget) -> Result<StandardizedLinear> {
    let standardizer = Standardizer::fit(train);
    let z = standardizer.apply(train)?;
    let sparse = baseline::train_l1_logreg(&z, cfg)?;
    let keep = budget.resolve(z.n_features()).min(sparse.nnz()).max(1);
    let model = baseline::retrain_top_features(&z, &sparse.weights, keep, cfg.refit_l2)?;
    Ok(StandardizedLinear { standardizer, model })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridScore {
    pub mean_accuracy: f64,
    pub mean_features: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome<C> {
    pub best: C,
    pub best_index: usize,
    pub scores: Vec<GridScore>,
    pub warnings: Vec<String>,
}

/// Scores every grid point on every fold and returns the point with the
/// highest mean validation accuracy; ties go to fewer mean selected features,
/// then to the earlier grid point. Folds and grid points run in parallel but
/// results are merged in grid order.
pub fn cross_validate<C, M, F>(d: &Dataset, grid: &[C], folds: usize, seed: u64, trainer: F) -> Result<CvOutcome<C>>
where
    C: Clone + Sync,
    M: Classifier,
    F: Fn(&Dataset, &C) -> Result<M> + Sync,
{
    if grid.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    let splits = make_splits(d, &SplitPlan::kfold(folds, seed))?;
    let parts: Vec<(Dataset, Dataset)> =
        splits.parts.iter().map(|s| split_data(d, s)).collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..parts.len()).map(move |f| (g, f)))
        .collect();
    let results: Vec<(f64, usize)> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train, valid) = &parts[f];
            let model = trainer(train, &grid[g])?;
            Ok((model.accuracy(valid)?, model.feature_count()))
        })
        .collect::<Result<_>>()?;

    let k = parts.len() as f64;
    let scores: Vec<GridScore> = results
        .chunks(parts.len())
        .map(|chunk| GridScore {
            mean_accuracy: chunk.iter().map(|r| r.0).sum::<f64>() / k,
            mean_features: chunk.iter().map(|r| r.1 as f64).sum::<f64>() / k,
        })
        .collect();
    let mut best_index = 0;
    for (g, s) in scores.iter().enumerate().skip(1) {
        let b = &scores[best_index];
        if s.mean_accuracy > b.mean_accuracy
            || (s.mean_accuracy == b.mean_accuracy && s.mean_features < b.mean_features)
        {
            best_index = g;
        }
    }
    Ok(CvOutcome {
        best: grid[best_index].clone(),
        best_index,
        scores,
        warnings: splits.warnings,
    })
}

/// Test results of one method over repeated splits.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub method: String,
    pub accuracies: Vec<f64>,
    pub features: Vec<usize>,
    pub mean: f64,
    /// Population standard deviation of the accuracies.
    pub std: f64,
    pub mean_features: f64,
    /// `100 * mean / mean_features`, absent when no feature was selected.
    pub normalized: Option<f64>,
}

impl EvalReport {
    pub fn new(dataset: &str, method: &str, accuracies: Vec<f64>, features: Vec<usize>) -> Self {
        let count = accuracies.len().max(1) as f64;
        let mean = accuracies.iter().sum::<f64>() / count;
        let var = accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / count;
        let mean_features = features.iter().sum::<usize>() as f64 / features.len().max(1) as f64;
        EvalReport {
            dataset: dataset.to_string(),
            method: method.to_string(),
            accuracies,
            features,
            mean,
            std: var.sqrt(),
            mean_features,
            normalized: (mean_features > 0.0).then(|| 100.0 * mean / mean_features),
        }
    }
}

/// Output layout for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    /// Tab-separated `dataset method mean std features normalized` rows.
    Rows,
}

pub fn format_reports(reports: &[EvalReport], format: Format) -> String {
    let mut out = String::new();
    let norm = |r: &EvalReport| r.normalized.map_or("NA".to_string(), |v| format!("{v:.4}"));
    match format {
        Format::Rows => {
            out.push_str("dataset\tmethod\tmean\tstd\tfeatures\tnormalized\n");
            for r in reports {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{:.6}\t{:.6}\t{:.4}\t{}",
                    r.dataset,
                    r.method,
                    r.mean,
                    r.std,
                    r.mean_features,
                    norm(r)
                );
            }
        }
        Format::Table => {
            let _ = writeln!(
                out,
                "{:<20} {:<12} {:>16} {:>9} {:>11}",
                "dataset", "method", "accuracy", "features", "normalized"
            );
            for r in reports {
                let acc = format!("{:.4} ± {:.4}", r.mean, r.std);
                let _ = writeln!(
                    out,
                    "{:<20} {:<12} {:>16} {:>9.2} {:>11}",
                    r.dataset,
                    r.method,
                    acc,
                    r.mean_features,
                    norm(r)
                );
            }
        }
    }
    out
}

/// Per-split outcome of [`evaluate_protocol`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome<C> {
    pub accuracies: Vec<f64>,
    pub features: Vec<usize>,
    /// Grid point chosen by cross-validation on each training part.
    pub chosen: Vec<C>,
    pub warnings: Vec<String>,
}

impl<C> ProtocolOutcome<C> {
    pub fn report(&self, dataset: &str, method: &str) -> EvalReport {
        EvalReport::new(dataset, method, self.accuracies.clone(), self.features.clone())
    }
}

/// For each holdout split: cross-validate `grid` on the training part, refit
/// the chosen point on the whole training part, and score the test part.
pub fn evaluate_protocol<C, M, F>(
    d: &Dataset,
    plan: &SplitPlan,
    grid: &[C],
    cv_folds: usize,
    trainer: F,
) -> Result<ProtocolOutcome<C>>
where
    C: Clone + Sync,
    M: Classifier,
    F: Fn(&Dataset, &C) -> Result<M> + Sync,
{
    let splits = make_splits(d, plan)?;
    let mut out = ProtocolOutcome {
        accuracies: Vec::new(),
        features: Vec::new(),
        chosen: Vec::new(),
        warnings: splits.warnings,
    };
    for split in &splits.parts {
        let (train, test) = split_data(d, split)?;
        let cv = cross_validate(&train, grid, cv_folds, plan.seed, &trainer)?;
        out.warnings.extend(cv.warnings);
        let model = trainer(&train, &cv.best)?;
        out.accuracies.push(model.accuracy(&test)?);
        out.features.push(model.feature_count());
        out.chosen.push(cv.best);
    }
    Ok(out)
}

/// The step-size grid used for SMaLL: `alpha in {0.1, 0.01, 0.001}` and
/// `beta in {0.001, 0.0001}` around a base configuration.
pub fn default_step_grid(base: &SolverConfig) -> Vec<SolverConfig> {
    let mut grid = Vec::new();
    for alpha in [0.1, 1e-2, 1e-3] {
        for beta in [1e-3, 1e-4] {
            grid.push(SolverConfig { alpha, beta, ..base.clone() });
        }
    }
    grid
}

/// Sparse-baseline coefficients `{0.1, 0.01, 0.001, 0.0001}`.
pub const DEFAULT_BASELINE_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
