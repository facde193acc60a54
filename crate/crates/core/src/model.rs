//! The trained predictor `x -> sign(max_j w_j . z + b_j)` with `z` the
//! standardized input.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{Dataset, Label, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMetadata {
    pub seed: u64,
    pub iterations: usize,
    /// Primal objective of the final weights on the training data.
    pub objective: f64,
}

/// Scores of one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub max: f64,
    /// Index of the highest-scoring prototype; lowest index on ties.
    pub winner: usize,
    pub scores: Vec<f64>,
}

impl Decision {
    /// `+1` only for a strictly positive maximum.
    pub fn label(&self) -> Label {
        if self.max > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityReport {
    pub support_sizes: Vec<usize>,
    /// Sum of support sizes: a feature used by two prototypes counts twice.
    pub total: usize,
    pub distinct: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    weights: Matrix,
    bias: Vec<f64>,
    standardizer: Standardizer,
    feature_names: Vec<String>,
    config: SolverConfig,
    metadata: ModelMetadata,
}

impl TrainedModel {
    pub fn new(
        weights: Matrix,
        bias: Vec<f64>,
        standardizer: Standardizer,
        feature_names: Vec<String>,
        config: SolverConfig,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        let (p, n) = weights.shape();
        if p == 0 || n == 0 {
            return Err(Error::Empty("prototype matrix"));
        }
        let check = |context, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { context, expected, found })
            }
        };
        check("bias", p, bias.len())?;
        check("standardizer", n, standardizer.dim())?;
        check("feature names", n, feature_names.len())?;
        if !weights.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: String::from("non-finite entry"),
            });
        }
        for (j, row) in weights.row_iter().enumerate() {
            let support = row.iter().filter(|v| **v != 0.0).count();
            if support > config.k {
                return Err(Error::InvalidParameter {
                    name: "weights",
                    reason: format!("prototype {j} has {support} non-zeros, budget is {}", config.k),
                });
            }
        }
        Ok(TrainedModel {
            weights,
            bias,
            standardizer,
            feature_names,
            config,
            metadata,
        })
    }

    /// Replaces the standardizer, e.g. after training on data it produced.
    pub fn with_standardizer(self, standardizer: Standardizer) -> Result<Self> {
        TrainedModel::new(
            self.weights,
            self.bias,
            standardizer,
            self.feature_names,
            self.config,
            self.metadata,
        )
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    pub fn prototypes(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_features(&self) -> usize {
        self.weights.cols()
    }

    /// Scores of a raw input; the stored standardizer is applied first.
    pub fn decision_values(&self, x: &[f64]) -> Result<Decision> {
        let z = self.standardizer.transform(x)?;
        self.decision_values_standardized(&z)
    }

    /// Scores of an input that is already standardized.
    pub fn decision_values_standardized(&self, z: &[f64]) -> Result<Decision> {
        if z.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                context: "input",
                expected: self.n_features(),
                found: z.len(),
            });
        }
        let scores: Vec<f64> = self
            .weights
            .row_iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, z) + b)
            .collect();
        let mut winner = 0;
        for (j, s) in scores.iter().enumerate() {
            if *s > scores[winner] {
                winner = j;
            }
        }
        Ok(Decision {
            max: scores[winner],
            winner,
            scores,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(self.decision_values(x)?.label())
    }

    /// Predictions for every row of a raw dataset.
    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<Label>> {
        (0..d.n_examples()).map(|i| self.predict(d.x(i))).collect()
    }

    /// Fraction of correctly labelled rows of a raw dataset.
    pub fn accuracy(&self, d: &Dataset) -> Result<f64> {
        let predicted = self.predict_dataset(d)?;
        let correct = predicted.iter().zip(d.labels()).filter(|(a, b)| a == b).count();
        Ok(correct as f64 / d.n_examples() as f64)
    }

    pub fn sparsity_report(&self) -> SparsityReport {
        let mut distinct = BTreeSet::new();
        let support_sizes = self
            .weights
            .row_iter()
            .map(|row| {
                let cols: Vec<usize> = (0..row.len()).filter(|&c| row[c] != 0.0).collect();
                distinct.extend(cols.iter().copied());
                cols.len()
            })
            .collect::<Vec<_>>();
        SparsityReport {
            total: support_sizes.iter().sum(),
            support_sizes,
            distinct: distinct.len(),
        }
    }
}
