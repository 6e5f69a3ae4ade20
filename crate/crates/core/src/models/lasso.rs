//! Least-squares models: group, sparse-group and overlapping sparse-group Lasso.
//!
//! By default the smooth part is viewed as `H(x) = 1/2 |Ax - b|^2` with `B = id`, so
//! `mu = lambda_min(A^T A)`, `L = lambda_max(A^T A)`, `tau = r = 1`. The affine view
//! `H(u) = 1/2 |u - b|^2`, `B(x) = Ax` uses `mu = L = 1`, `tau = lambda_min`,
//! `r = lambda_max` instead and produces the same step and rate.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::penalty::{OverlappingSparseGroupPenalty, SparseGroupPenalty};
use super::{LassoConstants, ModelError};
use crate::engine::{
    self, CompositeConstants, CompositeOracle, Condition, EngineError, Regularizer, Solution,
    SolverConfig,
};
use crate::prox::{GroupStructure, OverlapSolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LassoFlavor {
    /// Group Lasso.
    Gl,
    /// Sparse-group Lasso.
    Sgl,
    /// Overlapping sparse-group Lasso.
    Osgl,
}

impl LassoFlavor {
    pub fn name(&self) -> &'static str {
        match self {
            LassoFlavor::Gl => "gl",
            LassoFlavor::Sgl => "sgl",
            LassoFlavor::Osgl => "osgl",
        }
    }
}

/// How the least-squares term is split into `H` and `B`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ConstantsView {
    /// `B = id`, `H(x) = 1/2 |Ax - b|^2`.
    #[default]
    Identity,
    /// `B(x) = Ax`, `H(u) = 1/2 |u - b|^2`.
    Affine,
}

#[derive(Debug, Clone)]
pub struct LassoProblem {
    a: Array2<f64>,
    b: Array1<f64>,
    groups: GroupStructure,
    gamma1: f64,
    gamma2: f64,
    flavor: LassoFlavor,
}

impl LassoProblem {
    pub fn new(
        a: Array2<f64>,
        b: Array1<f64>,
        groups: GroupStructure,
        gamma1: f64,
        gamma2: f64,
        flavor: LassoFlavor,
    ) -> Result<Self, ModelError> {
        let (m, n) = a.dim();
        if m == 0 || n == 0 {
            return Err(ModelError::EmptyDesign);
        }
        if b.len() != m {
            return Err(ModelError::DimensionMismatch {
                expected: m,
                found: b.len(),
            });
        }
        if groups.n() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: groups.n(),
            });
        }
        if !(gamma1 >= 0.0) || !(gamma2 >= 0.0) {
            return Err(ModelError::NegativePenalty);
        }
        if flavor == LassoFlavor::Gl && gamma2 != 0.0 {
            return Err(ModelError::FlavorMismatch("group Lasso has no l1 term"));
        }
        if flavor != LassoFlavor::Osgl && !groups.disjoint() {
            return Err(ModelError::FlavorMismatch(
                "overlapping groups need the osgl flavor",
            ));
        }
        Ok(LassoProblem {
            a,
            b,
            groups,
            gamma1,
            gamma2,
            flavor,
        })
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn groups(&self) -> &GroupStructure {
        &self.groups
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn flavor(&self) -> LassoFlavor {
        self.flavor
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn with_flavor(&self, flavor: LassoFlavor) -> Result<Self, ModelError> {
        LassoProblem::new(
            self.a.clone(),
            self.b.clone(),
            self.groups.clone(),
            self.gamma1,
            self.gamma2,
            flavor,
        )
    }

    fn check_dim(&self, x: ArrayView1<f64>) -> Result<(), ModelError> {
        if x.len() != self.n() {
            Err(ModelError::DimensionMismatch {
                expected: self.n(),
                found: x.len(),
            })
        } else {
            Ok(())
        }
    }

    /// `A^T (Ax - b)`.
    pub fn smooth_gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let resid = self.a.dot(&x) - &self.b;
        self.a.t().dot(&resid)
    }

    /// `1/2 |Ax - b|^2`.
    pub fn smooth_value(&self, x: ArrayView1<f64>) -> f64 {
        let resid = self.a.dot(&x) - &self.b;
        0.5 * resid.dot(&resid)
    }

    pub fn oracle(&self, k: LassoConstants, view: ConstantsView) -> LeastSquaresOracle<'_> {
        let constants = match view {
            ConstantsView::Identity => CompositeConstants::identity_map(k.mu, k.lipschitz),
            ConstantsView::Affine => CompositeConstants {
                mu: 1.0,
                lipschitz: 1.0,
                tau: k.mu,
                r: k.lipschitz,
                xi: 0.0,
            },
        };
        LeastSquaresOracle {
            problem: self,
            constants,
        }
    }

    /// The regularizer matching the problem's flavor.
    pub fn penalty(&self, inner: OverlapSolverConfig) -> LassoPenalty {
        match self.flavor {
            LassoFlavor::Gl => {
                LassoPenalty::Closed(SparseGroupPenalty::group(self.groups.clone(), self.gamma1))
            }
            LassoFlavor::Sgl => LassoPenalty::Closed(SparseGroupPenalty::new(
                self.groups.clone(),
                self.gamma1,
                self.gamma2,
            )),
            LassoFlavor::Osgl => LassoPenalty::Overlapping(OverlappingSparseGroupPenalty::new(
                self.groups.clone(),
                self.gamma1,
                self.gamma2,
                inner,
            )),
        }
    }
}

/// `y - (1/L) A^T (Ay - b)`.
pub fn lasso_gradient_point(
    p: &LassoProblem,
    y: ArrayView1<f64>,
    lipschitz: f64,
) -> Result<Array1<f64>, ModelError> {
    p.check_dim(y)?;
    if !(lipschitz > 0.0) {
        return Err(EngineError::ConditionViolated(Condition::MuAtMostLipschitz).into());
    }
    let g = p.smooth_gradient(y);
    Ok(&y - &(g / lipschitz))
}

/// `1/2 |Ax - b|^2 + gamma1 sum_j |x(j)| + gamma2 |x|_1`.
pub fn lasso_objective(p: &LassoProblem, x: ArrayView1<f64>) -> Result<f64, ModelError> {
    p.check_dim(x)?;
    Ok(p.smooth_value(x) + super::penalty::penalty_value(x, &p.groups, p.gamma1, p.gamma2))
}

#[derive(Debug, Clone, Copy)]
pub struct LeastSquaresOracle<'a> {
    problem: &'a LassoProblem,
    constants: CompositeConstants,
}

impl CompositeOracle for LeastSquaresOracle<'_> {
    fn dim(&self) -> usize {
        self.problem.n()
    }

    fn constants(&self) -> CompositeConstants {
        self.constants
    }

    fn smooth_value(&self, x: ArrayView1<f64>) -> f64 {
        self.problem.smooth_value(x)
    }

    fn pulled_back_gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.problem.smooth_gradient(x)
    }
}

#[derive(Debug)]
pub enum LassoPenalty {
    Closed(SparseGroupPenalty),
    Overlapping(OverlappingSparseGroupPenalty),
}

impl Regularizer for LassoPenalty {
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        match self {
            LassoPenalty::Closed(p) => p.value(x),
            LassoPenalty::Overlapping(p) => p.value(x),
        }
    }

    fn prox(&self, v: ArrayView1<f64>, t: f64) -> Array1<f64> {
        match self {
            LassoPenalty::Closed(p) => p.prox(v, t),
            LassoPenalty::Overlapping(p) => p.prox(v, t),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LassoOptions {
    pub view: ConstantsView,
    pub inner: OverlapSolverConfig,
    /// Starting point for both `x` and `z`; zeros when absent.
    pub x0: Option<Array1<f64>>,
}

/// Rejects a numerically singular Gram matrix before iterating.
pub(crate) fn check_rank(k: LassoConstants) -> Result<(), ModelError> {
    if !(k.mu > 1e-12 * k.lipschitz) {
        return Err(EngineError::ConditionViolated(Condition::MuPositive).into());
    }
    Ok(())
}

/// Runs the accelerated iteration on `p` with its own flavor's prox.
pub fn solve_lasso(
    p: &LassoProblem,
    k: LassoConstants,
    cfg: &SolverConfig,
    opts: &LassoOptions,
) -> Result<Solution, ModelError> {
    check_rank(k)?;
    let oracle = p.oracle(k, opts.view);
    let penalty = p.penalty(opts.inner);
    let x0 = match &opts.x0 {
        Some(x0) => {
            p.check_dim(x0.view())?;
            x0.clone()
        }
        None => Array1::zeros(p.n()),
    };
    Ok(engine::solve(&oracle, &penalty, x0.clone(), x0, cfg)?)
}

fn solve_as(
    p: &LassoProblem,
    flavor: LassoFlavor,
    k: LassoConstants,
    cfg: &SolverConfig,
) -> Result<Solution, ModelError> {
    let q = p.with_flavor(flavor)?;
    solve_lasso(&q, k, cfg, &LassoOptions::default())
}

/// Group Lasso: groupwise shrinkage by `gamma/L`.
pub fn solve_gl(
    p: &LassoProblem,
    k: LassoConstants,
    cfg: &SolverConfig,
) -> Result<Solution, ModelError> {
    solve_as(p, LassoFlavor::Gl, k, cfg)
}

/// Sparse-group Lasso: groupwise soft threshold by `gamma2/L` then shrinkage by `gamma1/L`.
pub fn solve_sgl(
    p: &LassoProblem,
    k: LassoConstants,
    cfg: &SolverConfig,
) -> Result<Solution, ModelError> {
    solve_as(p, LassoFlavor::Sgl, k, cfg)
}

/// Overlapping sparse-group Lasso: the prox is solved through its dual every iteration.
pub fn solve_osgl(
    p: &LassoProblem,
    k: LassoConstants,
    cfg: &SolverConfig,
) -> Result<Solution, ModelError> {
    solve_as(p, LassoFlavor::Osgl, k, cfg)
}
