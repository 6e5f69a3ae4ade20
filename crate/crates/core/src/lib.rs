//! Accelerated composite proximal-gradient solvers with a provable global linear rate.
//!
//! * [`engine`]: the generic three-sequence iteration, its constants and a replayable
//!   convergence certificate.
//! * [`prox`]: proximal maps (soft threshold, group shrink, sparse-group, box-constrained
//!   `l1` and the dual solver for overlapping groups).
//! * [`models`]: group, sparse-group and overlapping sparse-group Lasso, and sparse-group
//!   logistic regression, with spectral constant estimation.
//! * [`baselines`]: ISTA and FISTA sharing the engine's stopping rule and trace format.
//! * [`data`]: synthetic planted-signal datasets and their on-disk format.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod engine;
pub mod models;
pub mod prox;
