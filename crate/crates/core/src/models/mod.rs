//! Shipped models assembled as oracle/penalty pairs, plus constant estimation.

mod lasso;
mod logistic;
mod penalty;
mod spectral;

pub use lasso::{
    lasso_gradient_point, lasso_objective, solve_gl, solve_lasso, solve_osgl, solve_sgl,
    ConstantsView, LassoFlavor, LassoOptions, LassoPenalty, LassoProblem, LeastSquaresOracle,
};
pub use logistic::{
    log1p_exp, sglr_gradient_point, sglr_intercept_update, sigmoid, solve_sglr, split_intercept,
    LogisticOracle, LogisticProblem,
};
pub use penalty::{
    penalty_value, InterceptPenalty, OverlappingSparseGroupPenalty, SparseGroupPenalty,
};
pub use spectral::{estimate_lambda_max, estimate_spectral_bounds, SpectralBounds};

use thiserror::Error;

use crate::engine::EngineError;
use crate::prox::ProxError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("design matrix has no rows or no columns")]
    EmptyDesign,
    #[error("design matrix is zero")]
    ZeroMatrix,
    #[error("penalty weights must be nonnegative")]
    NegativePenalty,
    #[error("{0}")]
    FlavorMismatch(&'static str),
    #[error("label {index} is {value}, expected -1 or +1")]
    InvalidLabel { index: usize, value: f64 },
    #[error("labels must contain both classes")]
    SingleClass,
}

/// `mu` and `L` of `1/2 |Ax - b|^2`, i.e. the extreme eigenvalues of `A^T A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConstants {
    pub mu: f64,
    pub lipschitz: f64,
}

impl From<SpectralBounds> for LassoConstants {
    fn from(b: SpectralBounds) -> Self {
        LassoConstants {
            mu: b.mu,
            lipschitz: b.lipschitz,
        }
    }
}
