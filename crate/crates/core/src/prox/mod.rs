//! Proximal maps for the shipped regularizers.
//!
//! Every closed form here is `argmin_x 1/2 |x - d|^2 + penalty(x)`. The sparse-group map
//! comes from the Fenchel dual of that problem: the `l_inf` dual block is solved by
//! clamping, the `l2` dual block by radial projection, and the primal solution is
//! recovered as `x = d + y_l2 + y_linf`. For overlapping groups the same dual has no
//! closed form and [`prox_overlapping_sparse_group`] solves it iteratively.

mod groups;
mod overlapping;

pub use groups::GroupStructure;
pub use overlapping::{
    prox_overlapping_sparse_group, recover_primal, solve_overlapping_dual, DualBlock, DualObserver,
    OverlapProxOutput, OverlapSolverConfig,
};

use ndarray::{Array1, ArrayView1, ArrayViewMut1};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error("group {0} is empty")]
    EmptyGroups(usize),
    #[error("group {group} contains index {index}, outside 0..{n}")]
    IndexOutOfRange {
        group: usize,
        index: usize,
        n: usize,
    },
    #[error("indices of group {0} are not strictly increasing")]
    UnsortedGroup(usize),
    #[error("box is inverted at coordinate {0}")]
    BoxInverted(usize),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inner tolerance must be positive")]
    NonPositiveTolerance,
}

/// Clamp `t` to `[-kappa, kappa]`.
#[inline]
pub fn threshold_clamp(t: f64, kappa: f64) -> f64 {
    if t < -kappa {
        -kappa
    } else if t > kappa {
        kappa
    } else {
        t
    }
}

#[inline]
fn soft(d: f64, gamma: f64) -> f64 {
    d + threshold_clamp(-d, gamma)
}

pub(crate) fn norm(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|e| e * e).sum::<f64>().sqrt()
}

/// Componentwise soft threshold, in place.
pub fn soft_threshold_in_place(mut d: ArrayViewMut1<f64>, gamma: f64) {
    d.mapv_inplace(|e| soft(e, gamma));
}

/// Group shrinkage `max(0, 1 - gamma/|d|) d`, in place. `|d| <= gamma` maps to zero.
pub fn group_shrink_in_place(mut d: ArrayViewMut1<f64>, gamma: f64) {
    let nrm = norm(d.view());
    if nrm <= gamma {
        d.fill(0.0);
    } else {
        let factor = (nrm - gamma) / nrm;
        d.mapv_inplace(|e| factor * e);
    }
}

/// Sparse-group shrinkage of one group, in place: soft threshold by `gamma2`, then
/// group shrink by `gamma1`.
pub fn sparse_group_shrink_in_place(mut d: ArrayViewMut1<f64>, gamma1: f64, gamma2: f64) {
    soft_threshold_in_place(d.view_mut(), gamma2);
    group_shrink_in_place(d, gamma1);
}

/// `argmin 1/2 |x - d|^2 + gamma |x|_1`.
pub fn prox_l1(d: ArrayView1<f64>, gamma: f64) -> Array1<f64> {
    d.mapv(|e| soft(e, gamma))
}

/// `argmin 1/2 |x - d|^2 + gamma |x|_2`.
pub fn prox_group_l2(d: ArrayView1<f64>, gamma: f64) -> Array1<f64> {
    let mut x = d.to_owned();
    group_shrink_in_place(x.view_mut(), gamma);
    x
}

/// `argmin 1/2 |x - d|^2 + gamma1 |x|_2 + gamma2 |x|_1`.
pub fn prox_sparse_group(d: ArrayView1<f64>, gamma1: f64, gamma2: f64) -> Array1<f64> {
    let mut x = d.to_owned();
    sparse_group_shrink_in_place(x.view_mut(), gamma1, gamma2);
    x
}

/// `argmin 1/2 |x - d|^2 + gamma |x|_1` subject to `lower <= x <= upper`.
///
/// Separable, so clamping the soft threshold is exact.
pub fn prox_l1_box(
    d: ArrayView1<f64>,
    gamma: f64,
    lower: ArrayView1<f64>,
    upper: ArrayView1<f64>,
) -> Result<Array1<f64>, ProxError> {
    for len in [lower.len(), upper.len()] {
        if len != d.len() {
            return Err(ProxError::DimensionMismatch {
                expected: d.len(),
                found: len,
            });
        }
    }
    if let Some(i) = (0..d.len()).find(|&i| !(lower[i] <= upper[i])) {
        return Err(ProxError::BoxInverted(i));
    }
    Ok(Array1::from_shape_fn(d.len(), |i| {
        soft(d[i], gamma).clamp(lower[i], upper[i])
    }))
}
