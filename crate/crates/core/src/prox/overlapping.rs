//! Sparse-group prox with overlapping groups, solved through its Fenchel dual.
//!
//! The primal subproblem is
//!
//! ```text
//! min_x 1/2 |x - d|^2 + gamma1 * sum_j |x(j)|_2 + gamma2 * |x|_1
//! ```
//!
//! and its dual is
//!
//! ```text
//! min 1/2 |d + y0 + sum_j E_j^T y_j|^2   s.t.  |y0|_inf <= gamma2,  |y_j|_2 <= gamma1
//! ```
//!
//! with `E_j` the coordinate embedding of group `j`. Both projections are closed form,
//! and any dual point maps to the primal point `x = d + y0 + sum_j E_j^T y_j`. The
//! dual gradient is `M^T (d + M y)` with `M M^T = diag(1 + coverage)`, so the step
//! `1 / (1 + max coverage)` is safe.

use ndarray::{Array1, ArrayView1};

use super::{norm, threshold_clamp, GroupStructure, ProxError};

/// Dual variables: one `l_inf`-ball block of length `n` and one `l2`-ball block per group.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBlock {
    pub linf: Array1<f64>,
    pub groups: Vec<Array1<f64>>,
}

impl DualBlock {
    pub fn zeros(g: &GroupStructure) -> Self {
        DualBlock {
            linf: Array1::zeros(g.n()),
            groups: g.iter().map(|grp| Array1::zeros(grp.len())).collect(),
        }
    }

    /// `y0 + sum_j E_j^T y_j`.
    pub fn embedded_sum(&self, g: &GroupStructure) -> Array1<f64> {
        let mut s = self.linf.clone();
        for (grp, y) in g.iter().zip(&self.groups) {
            for (&i, &v) in grp.iter().zip(y) {
                s[i] += v;
            }
        }
        s
    }

    /// Largest violation of the ball constraints (zero when feasible).
    pub fn infeasibility(&self, gamma1: f64, gamma2: f64) -> f64 {
        let linf = self
            .linf
            .iter()
            .map(|v| (v.abs() - gamma2).max(0.0))
            .fold(0.0, f64::max);
        self.groups
            .iter()
            .map(|y| (norm(y.view()) - gamma1).max(0.0))
            .fold(linf, f64::max)
    }

    fn matches(&self, g: &GroupStructure) -> bool {
        self.linf.len() == g.n()
            && self.groups.len() == g.len()
            && self
                .groups
                .iter()
                .zip(g.iter())
                .all(|(y, grp)| y.len() == grp.len())
    }
}

/// `x = d + y0 + sum_j E_j^T y_j`.
pub fn recover_primal(
    d: ArrayView1<f64>,
    blk: &DualBlock,
    g: &GroupStructure,
) -> Result<Array1<f64>, ProxError> {
    if d.len() != g.n() {
        return Err(ProxError::DimensionMismatch {
            expected: g.n(),
            found: d.len(),
        });
    }
    if !blk.matches(g) {
        return Err(ProxError::DimensionMismatch {
            expected: g.n() + g.total_members(),
            found: blk.linf.len() + blk.groups.iter().map(|y| y.len()).sum::<usize>(),
        });
    }
    Ok(&d + &blk.embedded_sum(g))
}

/// Called after every inner iteration with the iteration count, the dual block and
/// the primal point it maps to.
pub type DualObserver<'a> = &'a mut dyn FnMut(usize, &DualBlock, &Array1<f64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapSolverConfig {
    /// Stop when the dual projected-gradient-mapping norm is at most this.
    pub tol: f64,
    pub max_inner: usize,
}

impl Default for OverlapSolverConfig {
    fn default() -> Self {
        OverlapSolverConfig {
            tol: 1e-10,
            max_inner: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OverlapProxOutput {
    pub x: Array1<f64>,
    pub dual: DualBlock,
    pub iterations: usize,
    /// Dual gradient-mapping norm at the returned point's predecessor.
    pub residual: f64,
    /// False when `max_inner` ran out; `x` is then the best iterate seen.
    pub converged: bool,
}

/// Flat dual layout: `[y0 (n) | y_1 | y_2 | ...]`.
struct Layout<'a> {
    g: &'a GroupStructure,
    n: usize,
}

impl Layout<'_> {
    fn size(&self) -> usize {
        self.n + self.g.total_members()
    }

    fn primal(&self, d: ArrayView1<f64>, y: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = d[i] + y[i];
        }
        let mut off = self.n;
        for grp in self.g.iter() {
            for &i in grp {
                out[i] += y[off];
                off += 1;
            }
        }
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        out[..self.n].copy_from_slice(w);
        let mut off = self.n;
        for grp in self.g.iter() {
            for &i in grp {
                out[off] = w[i];
                off += 1;
            }
        }
    }

    fn project(&self, y: &mut [f64], gamma1: f64, gamma2: f64) {
        for v in &mut y[..self.n] {
            *v = threshold_clamp(*v, gamma2);
        }
        let mut off = self.n;
        for grp in self.g.iter() {
            let blk = &mut y[off..off + grp.len()];
            let nrm = blk.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm > gamma1 {
                let s = gamma1 / nrm;
                blk.iter_mut().for_each(|v| *v *= s);
            }
            off += grp.len();
        }
    }

    fn flatten(&self, blk: &DualBlock) -> Vec<f64> {
        let mut y = blk.linf.to_vec();
        for b in &blk.groups {
            y.extend(b.iter());
        }
        y
    }

    fn unflatten(&self, y: &[f64]) -> DualBlock {
        let mut off = self.n;
        let groups = self
            .g
            .iter()
            .map(|grp| {
                let b = Array1::from(y[off..off + grp.len()].to_vec());
                off += grp.len();
                b
            })
            .collect();
        DualBlock {
            linf: Array1::from(y[..self.n].to_vec()),
            groups,
        }
    }
}

/// Accelerated projected gradient on the dual with gradient-based momentum restart.
///
/// `warm` seeds the dual iterate (projected onto the current balls first). `observer`
/// sees every feasible dual iterate together with the primal point it recovers.
pub fn solve_overlapping_dual(
    d: ArrayView1<f64>,
    gamma1: f64,
    gamma2: f64,
    g: &GroupStructure,
    cfg: &OverlapSolverConfig,
    warm: Option<&DualBlock>,
    mut observer: Option<DualObserver<'_>>,
) -> Result<OverlapProxOutput, ProxError> {
    if d.len() != g.n() {
        return Err(ProxError::DimensionMismatch {
            expected: g.n(),
            found: d.len(),
        });
    }
    if !(cfg.tol > 0.0) {
        return Err(ProxError::NonPositiveTolerance);
    }
    let n = g.n();
    let layout = Layout { g, n };
    let size = layout.size();
    let lip = 1.0 + g.max_coverage() as f64;
    let inv_lip = 1.0 / lip;

    let mut y = match warm {
        Some(blk) if blk.matches(g) => layout.flatten(blk),
        _ => vec![0.0; size],
    };
    layout.project(&mut y, gamma1, gamma2);
    let mut v = y.clone();
    let mut u = vec![0.0; size];
    let mut grad = vec![0.0; size];
    let mut w = vec![0.0; n];
    let mut t = 1.0f64;

    let mut best = y.clone();
    let mut best_resid = f64::INFINITY;
    let mut resid = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=cfg.max_inner.max(1) {
        iterations = it;
        layout.primal(d, &v, &mut w);
        layout.gradient(&w, &mut grad);
        for k in 0..size {
            u[k] = v[k] - inv_lip * grad[k];
        }
        layout.project(&mut u, gamma1, gamma2);
        resid = lip
            * v.iter()
                .zip(&u)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();

        if let Some(obs) = observer.as_deref_mut() {
            let blk = layout.unflatten(&u);
            let mut x = vec![0.0; n];
            layout.primal(d, &u, &mut x);
            obs(it, &blk, &Array1::from(x));
        }

        if resid < best_resid {
            best_resid = resid;
            best.copy_from_slice(&u);
        }
        if resid <= cfg.tol {
            converged = true;
            break;
        }

        // Restart when the step points against the gradient mapping.
        let uphill: f64 = v
            .iter()
            .zip(&u)
            .zip(&y)
            .map(|((vk, uk), yk)| (vk - uk) * (uk - yk))
            .sum();
        if uphill > 0.0 {
            t = 1.0;
            v.copy_from_slice(&u);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for k in 0..size {
                v[k] = u[k] + beta * (u[k] - y[k]);
            }
            t = t_next;
        }
        y.copy_from_slice(&u);
    }

    let final_y = if converged { u } else { best };
    let mut x = vec![0.0; n];
    layout.primal(d, &final_y, &mut x);
    Ok(OverlapProxOutput {
        x: Array1::from(x),
        dual: layout.unflatten(&final_y),
        iterations,
        residual: if converged { resid } else { best_resid },
        converged,
    })
}

/// `argmin_x 1/2 |x - d|^2 + gamma1 sum_j |x(j)|_2 + gamma2 |x|_1` for arbitrary groups.
pub fn prox_overlapping_sparse_group(
    d: ArrayView1<f64>,
    gamma1: f64,
    gamma2: f64,
    g: &GroupStructure,
    tol: f64,
    max_inner: usize,
) -> Result<OverlapProxOutput, ProxError> {
    let cfg = OverlapSolverConfig { tol, max_inner };
    solve_overlapping_dual(d, gamma1, gamma2, g, &cfg, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::{prox_l1, prox_sparse_group};
    use ndarray::array;

    fn objective(x: &Array1<f64>, d: &Array1<f64>, g1: f64, g2: f64, g: &GroupStructure) -> f64 {
        let diff = x - d;
        0.5 * diff.dot(&diff)
            + g1 * g
                .iter()
                .map(|grp| grp.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt())
                .sum::<f64>()
            + g2 * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    #[test]
    fn no_groups_reduces_to_l1_exactly() {
        let g = GroupStructure::empty(4);
        let d = array![1.3, -0.2, 0.0, -4.0];
        let out = prox_overlapping_sparse_group(d.view(), 0.0, 0.5, &g, 1e-12, 100).unwrap();
        assert!(out.converged);
        assert_eq!(out.x, prox_l1(d.view(), 0.5));
    }

    #[test]
    fn disjoint_matches_closed_form() {
        let g = GroupStructure::new(5, vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        let d = array![2.0, -1.0, 0.3, 0.4, -2.5];
        let out = prox_overlapping_sparse_group(d.view(), 0.7, 0.2, &g, 1e-12, 10_000).unwrap();
        let mut expected = Array1::zeros(5);
        for grp in g.iter() {
            let sub = Array1::from_iter(grp.iter().map(|&i| d[i]));
            let p = prox_sparse_group(sub.view(), 0.7, 0.2);
            for (k, &i) in grp.iter().enumerate() {
                expected[i] = p[k];
            }
        }
        for i in 0..5 {
            assert!(
                (out.x[i] - expected[i]).abs() < 1e-10,
                "{} vs {}",
                out.x,
                expected
            );
        }
    }

    #[test]
    fn overlapping_duality_gap_closes() {
        let g = GroupStructure::new(4, vec![vec![0, 1, 2], vec![1, 2, 3]]).unwrap();
        let d = array![0.9, -0.4, 1.2, 0.35];
        let (g1, g2) = (0.3, 0.3);
        let out = prox_overlapping_sparse_group(d.view(), g1, g2, &g, 1e-12, 50_000).unwrap();
        assert!(out.converged);
        assert!(out.dual.infeasibility(g1, g2) <= 1e-12);
        let primal = objective(&out.x, &d, g1, g2, &g);
        let w = &d + &out.dual.embedded_sum(&g);
        let dual_value = 0.5 * d.dot(&d) - 0.5 * w.dot(&w);
        assert!(primal - dual_value >= -1e-12);
        assert!(primal - dual_value < 1e-10, "gap {}", primal - dual_value);
    }

    #[test]
    fn recover_primal_examples() {
        let g = GroupStructure::new(3, vec![vec![0, 2]]).unwrap();
        let d = array![1.0, -2.0, 0.5];
        let zero = DualBlock::zeros(&g);
        assert_eq!(recover_primal(d.view(), &zero, &g).unwrap(), d);
        let kill = DualBlock {
            linf: -&d,
            groups: vec![array![0.0, 0.0]],
        };
        assert_eq!(
            recover_primal(d.view(), &kill, &g).unwrap(),
            Array1::<f64>::zeros(3)
        );
        let bad = DualBlock {
            linf: Array1::zeros(3),
            groups: vec![],
        };
        assert!(recover_primal(d.view(), &bad, &g).is_err());
    }

    #[test]
    fn worked_pair_recovers_sparse_group() {
        // d = (3, 4), gamma1 = gamma2 = 1: y2 = Th(-d) = (-1, -1), s = (2, 3),
        // y1 = -gamma1 s / |s|.
        let g = GroupStructure::new(2, vec![vec![0, 1]]).unwrap();
        let d = array![3.0, 4.0];
        let y2 = d.mapv(|v| threshold_clamp(-v, 1.0));
        let s = &d + &y2;
        let y1 = &s * (-1.0 / norm(s.view()));
        let blk = DualBlock {
            linf: y2,
            groups: vec![y1],
        };
        let x = recover_primal(d.view(), &blk, &g).unwrap();
        let expected = prox_sparse_group(d.view(), 1.0, 1.0);
        for i in 0..2 {
            assert!((x[i] - expected[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn sandwich_bound_is_equality_along_iterations() {
        let g =
            GroupStructure::new(6, vec![vec![0, 1, 2, 3], vec![2, 3, 4, 5], vec![0, 5]]).unwrap();
        let d = array![0.5, -1.5, 2.0, 0.1, -0.7, 1.1];
        let cfg = OverlapSolverConfig {
            tol: 1e-13,
            max_inner: 100_000,
        };
        let mut history: Vec<(DualBlock, Array1<f64>)> = Vec::new();
        let mut obs =
            |_: usize, b: &DualBlock, x: &Array1<f64>| history.push((b.clone(), x.clone()));
        let out =
            solve_overlapping_dual(d.view(), 0.4, 0.25, &g, &cfg, None, Some(&mut obs)).unwrap();
        assert!(out.converged);
        let sum_star = out.dual.embedded_sum(&g);
        for (blk, x) in &history {
            assert!(blk.infeasibility(0.4, 0.25) <= 1e-12);
            let lhs = norm((x - &out.x).view());
            let rhs = norm((&blk.embedded_sum(&g) - &sum_star).view());
            assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + rhs), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn max_inner_is_flagged() {
        let g = GroupStructure::new(4, vec![vec![0, 1, 2], vec![1, 2, 3]]).unwrap();
        let d = array![0.9, -0.4, 1.2, 0.35];
        let out = prox_overlapping_sparse_group(d.view(), 0.3, 0.3, &g, 1e-15, 2).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
        assert!(out.dual.infeasibility(0.3, 0.3) <= 1e-12);
    }

    #[test]
    fn errors() {
        let g = GroupStructure::empty(3);
        assert!(matches!(
            prox_overlapping_sparse_group(array![1.0].view(), 0.1, 0.1, &g, 1e-10, 10),
            Err(ProxError::DimensionMismatch { .. })
        ));
        assert_eq!(
            prox_overlapping_sparse_group(array![1.0, 2.0, 3.0].view(), 0.1, 0.1, &g, 0.0, 10)
                .unwrap_err(),
            ProxError::NonPositiveTolerance
        );
    }
}
