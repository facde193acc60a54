//! Labeled examples and feature standardization.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Floor applied to the scale of (near-)constant columns.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Name given to the constant column added by [`Dataset::with_intercept`].
pub const INTERCEPT_NAME: &str = "(intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// The label as `-1.0` or `+1.0`.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    /// Accepts exactly `-1` or `+1`.
    pub fn from_sign(v: f64) -> Option<Label> {
        if v == 1.0 {
            Some(Label::Positive)
        } else if v == -1.0 {
            Some(Label::Negative)
        } else {
            None
        }
    }
}

/// `m` examples with `n` real features and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<Label>,
    feature_names: Vec<String>,
    id: String,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<Label>,
        feature_names: Vec<String>,
        id: impl Into<String>,
    ) -> Result<Self> {
        let (m, n) = features.shape();
        if m == 0 {
            return Err(Error::Empty("dataset has no examples"));
        }
        if n == 0 {
            return Err(Error::Empty("dataset has no features"));
        }
        if labels.len() != m {
            return Err(Error::DimensionMismatch {
                context: "labels",
                expected: m,
                found: labels.len(),
            });
        }
        if feature_names.len() != n {
            return Err(Error::DimensionMismatch {
                context: "feature names",
                expected: n,
                found: feature_names.len(),
            });
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                pos / n,
                pos % n
            )));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            id: id.into(),
        })
    }

    /// Convenience constructor with generated names `x0, x1, ...`.
    pub fn from_signs(features: Matrix, signs: &[f64]) -> Result<Self> {
        let labels = signs
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                Label::from_sign(s)
                    .ok_or_else(|| Error::InvalidDataset(format!("label {s} at row {i} is not +-1")))
            })
            .collect::<Result<Vec<_>>>()?;
        let names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        Dataset::new(features, labels, names, "anonymous")
    }

    #[inline]
    pub fn n_examples(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Label of example `i` as `+-1.0`.
    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.labels[i].sign()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn positives(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Label::Positive)
            .map(|(i, _)| i)
    }

    pub fn negatives(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Label::Negative)
            .map(|(i, _)| i)
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let n = self.n_features();
        let mut data = Vec::with_capacity(indices.len() * n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_examples() {
                return Err(Error::DimensionMismatch {
                    context: "subset index",
                    expected: self.n_examples(),
                    found: i,
                });
            }
            data.extend_from_slice(self.x(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(
            Matrix::from_vec(indices.len(), n, data)?,
            labels,
            self.feature_names.clone(),
            self.id.clone(),
        )
    }

    /// Appends a constant column of ones (named [`INTERCEPT_NAME`]).
    pub fn with_intercept(&self) -> Dataset {
        let (m, n) = self.features.shape();
        let mut data = Vec::with_capacity(m * (n + 1));
        for row in self.features.row_iter() {
            data.extend_from_slice(row);
            data.push(1.0);
        }
        let mut names = self.feature_names.clone();
        names.push(String::from(INTERCEPT_NAME));
        Dataset {
            features: Matrix::from_vec(m, n + 1, data).expect("sized above"),
            labels: self.labels.clone(),
            feature_names: names,
            id: self.id.clone(),
        }
    }
}

/// Per-column affine map to zero mean and unit population variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Fits column means and population standard deviations.
    pub fn fit(d: &Dataset) -> Standardizer {
        let (m, n) = d.features.shape();
        let mf = m as f64;
        let mut mean = alloc::vec![0.0; n];
        for row in d.features.row_iter() {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for v in &mut mean {
            *v /= mf;
        }
        let mut var = alloc::vec![0.0; n];
        for row in d.features.row_iter() {
            for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                let c = v - mu;
                *acc += c * c;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| math::sqrt(v / mf).max(SCALE_FLOOR))
            .collect();
        Standardizer { mean, scale }
    }

    pub fn identity(n: usize) -> Standardizer {
        Standardizer {
            mean: alloc::vec![0.0; n],
            scale: alloc::vec![1.0; n],
        }
    }

    pub fn from_parts(mean: Vec<f64>, scale: Vec<f64>) -> Result<Standardizer> {
        if mean.len() != scale.len() {
            return Err(Error::DimensionMismatch {
                context: "standardizer scale",
                expected: mean.len(),
                found: scale.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("mean", "must be finite"));
        }
        if scale.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::param("scale", "must be finite and positive"));
        }
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "standardizer",
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, mu), s)| (v - mu) / s)
            .collect())
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z.len())?;
        Ok(z.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, mu), s)| v * s + mu)
            .collect())
    }

    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        self.check(d.n_features())?;
        let (m, n) = d.features.shape();
        let mut data = Vec::with_capacity(m * n);
        for row in d.features.row_iter() {
            data.extend(
                row.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((v, mu), s)| (v - mu) / s),
            );
        }
        Dataset::new(
            Matrix::from_vec(m, n, data)?,
            d.labels.clone(),
            d.feature_names.clone(),
            d.id.clone(),
        )
    }
}
