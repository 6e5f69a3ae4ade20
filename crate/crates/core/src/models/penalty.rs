//! Group penalties wired as engine regularizers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ndarray::{s, Array1, ArrayView1};

use crate::engine::Regularizer;
use crate::prox::{
    group_shrink_in_place, solve_overlapping_dual, sparse_group_shrink_in_place, threshold_clamp,
    DualBlock, GroupStructure, OverlapSolverConfig,
};

fn group_norm_sum(x: ArrayView1<f64>, groups: &GroupStructure) -> f64 {
    groups
        .iter()
        .map(|g| g.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt())
        .sum()
}

fn l1(x: ArrayView1<f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// `gamma1 * sum_j |x(j)| + gamma2 * |x|_1` over disjoint groups; coordinates outside
/// every group only see the `l1` term.
#[derive(Debug, Clone)]
pub struct SparseGroupPenalty {
    groups: GroupStructure,
    uncovered: Vec<usize>,
    gamma1: f64,
    gamma2: f64,
    /// Plain group penalty: skip the soft-threshold pass.
    group_only: bool,
}

impl SparseGroupPenalty {
    /// Panics if `groups` overlap; callers validate disjointness first.
    pub fn new(groups: GroupStructure, gamma1: f64, gamma2: f64) -> Self {
        assert!(
            groups.disjoint(),
            "sparse-group closed form needs disjoint groups"
        );
        let uncovered = groups.uncovered();
        SparseGroupPenalty {
            groups,
            uncovered,
            gamma1,
            gamma2,
            group_only: false,
        }
    }

    /// `gamma * sum_j |x(j)|`.
    pub fn group(groups: GroupStructure, gamma: f64) -> Self {
        SparseGroupPenalty {
            group_only: true,
            ..SparseGroupPenalty::new(groups, gamma, 0.0)
        }
    }

    fn gather(&self, v: &Array1<f64>, g: &[usize]) -> Array1<f64> {
        Array1::from_iter(g.iter().map(|&i| v[i]))
    }
}

impl Regularizer for SparseGroupPenalty {
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let groups = self.gamma1 * group_norm_sum(x, &self.groups);
        if self.group_only {
            groups
        } else {
            groups + self.gamma2 * l1(x)
        }
    }

    fn prox(&self, v: ArrayView1<f64>, t: f64) -> Array1<f64> {
        assert_eq!(v.len(), self.groups.n(), "penalty dimension");
        let (g1, g2) = (t * self.gamma1, t * self.gamma2);
        let mut out = v.to_owned();
        for g in self.groups.iter() {
            let mut sub = self.gather(&out, g);
            if self.group_only {
                group_shrink_in_place(sub.view_mut(), g1);
            } else {
                sparse_group_shrink_in_place(sub.view_mut(), g1, g2);
            }
            for (&i, &val) in g.iter().zip(&sub) {
                out[i] = val;
            }
        }
        if !self.group_only {
            for &i in &self.uncovered {
                let d = out[i];
                out[i] = d + threshold_clamp(-d, g2);
            }
        }
        out
    }
}

/// Sparse-group penalty over arbitrary (overlapping) groups; the prox is computed by
/// the dual solver, warm-started from the previous call.
#[derive(Debug)]
pub struct OverlappingSparseGroupPenalty {
    groups: GroupStructure,
    gamma1: f64,
    gamma2: f64,
    inner: OverlapSolverConfig,
    warm: Mutex<Option<DualBlock>>,
    calls: AtomicUsize,
    inner_iterations: AtomicUsize,
    unconverged: AtomicUsize,
}

impl OverlappingSparseGroupPenalty {
    pub fn new(
        groups: GroupStructure,
        gamma1: f64,
        gamma2: f64,
        inner: OverlapSolverConfig,
    ) -> Self {
        OverlappingSparseGroupPenalty {
            groups,
            gamma1,
            gamma2,
            inner,
            warm: Mutex::new(None),
            calls: AtomicUsize::new(0),
            inner_iterations: AtomicUsize::new(0),
            unconverged: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner_iterations(&self) -> usize {
        self.inner_iterations.load(Ordering::Relaxed)
    }

    /// Prox calls whose dual solve ran out of inner iterations.
    pub fn unconverged_calls(&self) -> usize {
        self.unconverged.load(Ordering::Relaxed)
    }
}

impl Regularizer for OverlappingSparseGroupPenalty {
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        self.gamma1 * group_norm_sum(x, &self.groups) + self.gamma2 * l1(x)
    }

    fn prox(&self, v: ArrayView1<f64>, t: f64) -> Array1<f64> {
        let mut warm = self.warm.lock().unwrap_or_else(|e| e.into_inner());
        let out = solve_overlapping_dual(
            v,
            t * self.gamma1,
            t * self.gamma2,
            &self.groups,
            &self.inner,
            warm.as_ref(),
            None,
        )
        .expect("penalty dimension matches the oracle");
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner_iterations
            .fetch_add(out.iterations, Ordering::Relaxed);
        if !out.converged {
            self.unconverged.fetch_add(1, Ordering::Relaxed);
        }
        *warm = Some(out.dual);
        out.x
    }
}

/// Sparse-group penalty on the first `n` coordinates of an `(n+1)`-vector whose last
/// entry is an unpenalized intercept.
#[derive(Debug, Clone)]
pub struct InterceptPenalty {
    inner: SparseGroupPenalty,
}

impl InterceptPenalty {
    pub fn new(groups: GroupStructure, gamma1: f64, gamma2: f64) -> Self {
        InterceptPenalty {
            inner: SparseGroupPenalty::new(groups, gamma1, gamma2),
        }
    }
}

impl Regularizer for InterceptPenalty {
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let n = x.len() - 1;
        self.inner.value(x.slice(s![..n]))
    }

    fn prox(&self, v: ArrayView1<f64>, t: f64) -> Array1<f64> {
        let n = v.len() - 1;
        let mut out = Array1::zeros(n + 1);
        out.slice_mut(s![..n])
            .assign(&self.inner.prox(v.slice(s![..n]), t));
        out[n] = v[n];
        out
    }
}

/// `gamma1 * sum_j |x(j)| + gamma2 * |x|_1`.
pub fn penalty_value(x: ArrayView1<f64>, groups: &GroupStructure, gamma1: f64, gamma2: f64) -> f64 {
    gamma1 * group_norm_sum(x, groups) + gamma2 * l1(x)
}
