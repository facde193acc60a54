//! Sparse multiprototype linear learner.
//!
//! A `k`-sparse `p`-prototype linear predictor classifies `x` by the sign of
//! `max_j w_j . x`, where each prototype `w_j` has at most `k` non-zero
//! weights. Training relaxes the combinatorial sparsity constraint into a
//! convex-concave saddle-point problem over a relaxed mask `eps` and one dual
//! vector per example, solved with an extragradient (Mirror-Prox) loop.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line tool, and evaluation harnesses live in the companion `small` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod cluster;
pub mod dataset;
pub mod dnf;
mod error;
pub mod losses;
pub(crate) mod math;
pub mod matrix;
pub mod model;
pub mod projections;
pub mod saddle;
pub mod solver;

pub use dataset::{Dataset, Label, Standardizer};
pub use dnf::{DnfFormula, Literal, RuleReport};
pub use error::{Error, Result};
pub use losses::{PrototypeAssignment, PrototypeMatrix};
pub use matrix::Matrix;
pub use model::{Decision, ModelMetadata, SparsityReport, TrainedModel};
pub use saddle::{DualSet, GradientMode, Polarity, SaddleProblem};
pub use solver::{SolverConfig, SolverTrace, TraceRecord};
