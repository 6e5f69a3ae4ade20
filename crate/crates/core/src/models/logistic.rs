//! Sparse-group logistic regression with an unpenalized intercept.
//!
//! Variables are stacked as `(x; b)` in an `(n+1)`-vector. The smooth part is
//! `(1/m) sum_i ln(1 + exp(-y_i (a_i^T x + b)))`; its gradient step is computed with a
//! sign-branched sigmoid so no exponential overflows.

use ndarray::{s, Array1, Array2, ArrayView1};

use super::penalty::InterceptPenalty;
use super::spectral::estimate_lambda_max;
use super::ModelError;
use crate::engine::{
    self, CompositeConstants, CompositeOracle, Condition, EngineError, Solution, SolverConfig,
};
use crate::prox::GroupStructure;

#[derive(Debug, Clone)]
pub struct LogisticProblem {
    a: Array2<f64>,
    labels: Array1<f64>,
    groups: GroupStructure,
    gamma1: f64,
    gamma2: f64,
}

/// `1 / (1 + exp(-t))` without overflow.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(t))` without overflow.
#[inline]
pub fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl LogisticProblem {
    pub fn new(
        a: Array2<f64>,
        labels: Array1<f64>,
        groups: GroupStructure,
        gamma1: f64,
        gamma2: f64,
    ) -> Result<Self, ModelError> {
        let (m, n) = a.dim();
        if m == 0 || n == 0 {
            return Err(ModelError::EmptyDesign);
        }
        if labels.len() != m {
            return Err(ModelError::DimensionMismatch {
                expected: m,
                found: labels.len(),
            });
        }
        if groups.n() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: groups.n(),
            });
        }
        if let Some((index, &value)) = labels
            .iter()
            .enumerate()
            .find(|(_, &v)| v != 1.0 && v != -1.0)
        {
            return Err(ModelError::InvalidLabel { index, value });
        }
        if m < 2 || !labels.iter().any(|&v| v > 0.0) || !labels.iter().any(|&v| v < 0.0) {
            return Err(ModelError::SingleClass);
        }
        if !(gamma1 >= 0.0) || !(gamma2 >= 0.0) {
            return Err(ModelError::NegativePenalty);
        }
        if !groups.disjoint() {
            return Err(ModelError::FlavorMismatch(
                "logistic model needs disjoint groups",
            ));
        }
        Ok(LogisticProblem {
            a,
            labels,
            groups,
            gamma1,
            gamma2,
        })
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
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

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    fn check_aug(&self, y_aug: ArrayView1<f64>) -> Result<(), ModelError> {
        if y_aug.len() != self.n() + 1 {
            Err(ModelError::DimensionMismatch {
                expected: self.n() + 1,
                found: y_aug.len(),
            })
        } else {
            Ok(())
        }
    }

    fn margins(&self, y_aug: ArrayView1<f64>) -> Array1<f64> {
        let n = self.n();
        let b = y_aug[n];
        let mut t = self.a.dot(&y_aug.slice(s![..n]));
        t.mapv_inplace(|v| v + b);
        t
    }

    /// `(1/m) sum_i ln(1 + exp(-y_i (a_i^T x + b)))`.
    pub fn smooth_value(&self, y_aug: ArrayView1<f64>) -> f64 {
        let t = self.margins(y_aug);
        let total: f64 = t
            .iter()
            .zip(&self.labels)
            .map(|(&ti, &yi)| log1p_exp(-yi * ti))
            .sum();
        total / self.m() as f64
    }

    /// `sum_i y_i sigma(-y_i (a_i^T x + b)) (a_i; 1)`; the gradient is `-(1/m)` times this.
    fn weighted_sum(&self, y_aug: ArrayView1<f64>) -> Array1<f64> {
        let n = self.n();
        let t = self.margins(y_aug);
        let w = Array1::from_iter(
            t.iter()
                .zip(&self.labels)
                .map(|(&ti, &yi)| yi * sigmoid(-yi * ti)),
        );
        let mut out = Array1::zeros(n + 1);
        out.slice_mut(s![..n]).assign(&self.a.t().dot(&w));
        out[n] = w.sum();
        out
    }

    /// Gradient of the smooth part with respect to `(x; b)`.
    pub fn smooth_gradient(&self, y_aug: ArrayView1<f64>) -> Array1<f64> {
        self.weighted_sum(y_aug) * (-1.0 / self.m() as f64)
    }

    /// `lambda_max([A | 1]^T [A | 1]) / (4m)`, a bound on the Hessian of the smooth part.
    pub fn default_lipschitz(&self) -> Result<f64, ModelError> {
        let (m, n) = self.a.dim();
        let mut aug = Array2::<f64>::ones((m, n + 1));
        aug.slice_mut(s![.., ..n]).assign(&self.a);
        let (lmax, _) = estimate_lambda_max(aug.view(), 1e-12, 100_000)?;
        Ok(lmax / (4.0 * m as f64))
    }

    pub fn oracle(&self, mu: f64, lipschitz: f64) -> LogisticOracle<'_> {
        LogisticOracle {
            problem: self,
            constants: CompositeConstants::identity_map(mu, lipschitz),
        }
    }

    pub fn penalty(&self) -> InterceptPenalty {
        InterceptPenalty::new(self.groups.clone(), self.gamma1, self.gamma2)
    }
}

/// `y_aug + (1/(mL)) sum_i y_i sigma(-y_i (a_i^T x + b)) (a_i; 1)`.
pub fn sglr_gradient_point(
    p: &LogisticProblem,
    y_aug: ArrayView1<f64>,
    lipschitz: f64,
) -> Result<Array1<f64>, ModelError> {
    p.check_aug(y_aug)?;
    if !(lipschitz > 0.0) {
        return Err(EngineError::ConditionViolated(Condition::MuAtMostLipschitz).into());
    }
    let scale = 1.0 / (p.m() as f64 * lipschitz);
    Ok(&y_aug + &(p.weighted_sum(y_aug) * scale))
}

/// The intercept entry of [`sglr_gradient_point`]; no penalty acts on it, so this is
/// also the next intercept.
pub fn sglr_intercept_update(
    p: &LogisticProblem,
    y_aug: ArrayView1<f64>,
    lipschitz: f64,
) -> Result<f64, ModelError> {
    let d = sglr_gradient_point(p, y_aug, lipschitz)?;
    Ok(d[p.n()])
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticOracle<'a> {
    problem: &'a LogisticProblem,
    constants: CompositeConstants,
}

impl CompositeOracle for LogisticOracle<'_> {
    fn dim(&self) -> usize {
        self.problem.n() + 1
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

/// Solution vector split into coefficients and intercept.
pub fn split_intercept(x_aug: &Array1<f64>) -> (Array1<f64>, f64) {
    let n = x_aug.len() - 1;
    (x_aug.slice(s![..n]).to_owned(), x_aug[n])
}

/// Runs the accelerated iteration from zero with user-supplied `mu` and `L`.
pub fn solve_sglr(
    p: &LogisticProblem,
    mu: f64,
    lipschitz: f64,
    cfg: &SolverConfig,
) -> Result<Solution, ModelError> {
    let oracle = p.oracle(mu, lipschitz);
    let penalty = p.penalty();
    let zeros = Array1::zeros(p.n() + 1);
    Ok(engine::solve(&oracle, &penalty, zeros.clone(), zeros, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, array};

    fn problem(gamma: f64) -> LogisticProblem {
        let a = arr2(&[
            [0.5, -1.0, 0.2],
            [1.5, 0.3, -0.7],
            [-0.4, 0.8, 1.1],
            [0.9, -0.2, 0.4],
            [-1.2, 0.6, -0.3],
            [0.1, 0.1, 0.9],
        ]);
        let y = array![1.0, 1.0, -1.0, 1.0, -1.0, -1.0];
        LogisticProblem::new(
            a,
            y,
            GroupStructure::contiguous(3, 3).unwrap(),
            gamma,
            gamma,
        )
        .unwrap()
    }

    #[test]
    fn stable_scalars() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) == 1.0 && sigmoid(-800.0) == 0.0);
        assert!((log1p_exp(800.0) - 800.0).abs() < 1e-12);
        assert!(log1p_exp(-800.0) >= 0.0 && log1p_exp(-800.0) < 1e-300);
        assert!((log1p_exp(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let a = Array2::<f64>::ones((2, 1));
        let g = GroupStructure::contiguous(1, 1).unwrap();
        assert_eq!(
            LogisticProblem::new(a.clone(), array![1.0, 0.0], g.clone(), 0.1, 0.1).unwrap_err(),
            ModelError::InvalidLabel {
                index: 1,
                value: 0.0
            }
        );
        assert_eq!(
            LogisticProblem::new(a.clone(), array![1.0, 1.0], g.clone(), 0.1, 0.1).unwrap_err(),
            ModelError::SingleClass
        );
        assert!(LogisticProblem::new(a, array![1.0, -1.0], g, 0.1, 0.1).is_ok());
    }

    #[test]
    fn balanced_labels_zero_intercept_gradient() {
        let mut p = problem(0.1);
        p.labels = array![1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let zero = Array1::zeros(4);
        let b = sglr_intercept_update(&p, zero.view(), 2.0).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn saturated_margins_have_vanishing_step() {
        let p = problem(0.1);
        // Separating direction scaled up: pick x so that y_i a_i^T x is large and positive
        // via the intercept-free fit of the labels.
        let x = p.a().t().dot(p.labels());
        let margins = p.a().dot(&x) * p.labels();
        assert!(margins.iter().all(|&v| v > 0.0), "{margins}");
        let mut y_aug = Array1::zeros(4);
        y_aug.slice_mut(s![..3]).assign(&(x * 1e4));
        let d = sglr_gradient_point(&p, y_aug.view(), 1.0).unwrap();
        let diff = &d - &y_aug;
        assert!(diff.iter().all(|v| v.abs() < 1e-100), "{diff}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = problem(0.1);
        let y = array![0.3, -0.2, 0.5, 0.1];
        let g = p.smooth_gradient(y.view());
        let h = 1e-6;
        for i in 0..4 {
            let mut up = y.clone();
            let mut dn = y.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (p.smooth_value(up.view()) - p.smooth_value(dn.view())) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3),
                "{i}: {fd} vs {}",
                g[i]
            );
        }
        let l = 3.0;
        let d = sglr_gradient_point(&p, y.view(), l).unwrap();
        for i in 0..4 {
            assert!((d[i] - (y[i] - g[i] / l)).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_penalty_leaves_intercept_only_fit() {
        let a = arr2(&[[0.5, 1.0], [-0.3, 0.2], [1.1, -0.4], [0.7, 0.9]]);
        let y = array![1.0, 1.0, 1.0, -1.0];
        let p = LogisticProblem::new(a, y, GroupStructure::contiguous(2, 1).unwrap(), 1e6, 1e6)
            .unwrap();
        let l = p.default_lipschitz().unwrap();
        let sol = solve_sglr(&p, 1e-1 * l, l, &SolverConfig::new(100_000, 1e-12)).unwrap();
        assert!(sol.converged());
        let (x, b) = split_intercept(&sol.state.x);
        assert_eq!(x, Array1::<f64>::zeros(2));
        // bisection on sum_i y_i sigma(-y_i b) = 0
        let f = |b: f64| {
            p.labels()
                .iter()
                .map(|&yi| yi * sigmoid(-yi * b))
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b_star = 0.5 * (lo + hi);
        assert!((b - b_star).abs() < 1e-9, "{b} vs {b_star}");
        assert!((b_star - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let p = problem(0.1);
        assert!(sglr_gradient_point(&p, array![1.0].view(), 1.0).is_err());
        assert!(sglr_gradient_point(&p, Array1::zeros(4).view(), 0.0).is_err());
    }
}
