//! Accelerated composite proximal-gradient iteration with a global linear rate.
//!
//! The method targets `min H(B(x)) + R(x)` where `H` is `mu`-strongly convex with
//! `L`-Lipschitz gradient, `B` satisfies `tau*|x - y|^2 <= |B(x) - B(y)|^2`,
//! `|J_B|^2 <= r` and a curvature-interaction bound `xi`. Each iteration keeps three
//! sequences: an extrapolated point `y`, the primal iterate `x` produced by a prox-gradient
//! step from `y`, and an auxiliary sequence `z` that carries the momentum.
//!
//! Whenever `tau*mu - xi > 0` the Lyapunov quantity
//! `F(x^k) - F* + C*|z^k - x*|^2` contracts by a factor `1 - theta` per iteration.
//! [`certify_linear_rate`] replays a solve and checks that contraction numerically.

use std::fmt;
use std::time::Instant;

use ndarray::{Array1, ArrayView1, Zip};
use thiserror::Error;

/// Which of the admissibility inequalities on the composite constants failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    MuPositive,
    MuAtMostLipschitz,
    TauPositive,
    TauAtMostR,
    XiNonNegative,
    CurvatureGap,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::MuPositive => "μ>0",
            Condition::MuAtMostLipschitz => "μ≤L",
            Condition::TauPositive => "τ>0",
            Condition::TauAtMostR => "τ≤r",
            Condition::XiNonNegative => "ξ≥0",
            Condition::CurvatureGap => "τμ−ξ>0",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("condition violated: {0}")]
    ConditionViolated(Condition),
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value produced by {0}")]
    NonFiniteValue(&'static str),
    #[error("max_iters must be at least 1")]
    ZeroIterationBudget,
}

/// Problem constants for `H(B(x)) + R(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeConstants {
    /// Strong-convexity modulus of `H`.
    pub mu: f64,
    /// Gradient-Lipschitz modulus of `H`.
    pub lipschitz: f64,
    /// Lower bound `tau` with `tau*|x - y|^2 <= |B(x) - B(y)|^2`.
    pub tau: f64,
    /// Upper bound on the squared Jacobian norm of `B`.
    pub r: f64,
    /// Curvature-interaction bound between `grad H` and the second derivative of `B`.
    pub xi: f64,
}

impl CompositeConstants {
    /// Constants for `B = id`: `tau = r = 1`, `xi = 0`.
    pub fn identity_map(mu: f64, lipschitz: f64) -> Self {
        CompositeConstants {
            mu,
            lipschitz,
            tau: 1.0,
            r: 1.0,
            xi: 0.0,
        }
    }

    /// `tau*mu - xi`, the quantity that must stay positive.
    pub fn curvature_gap(&self) -> f64 {
        self.tau * self.mu - self.xi
    }

    /// `r*L`, the inverse of the primal step size.
    pub fn scaled_lipschitz(&self) -> f64 {
        self.r * self.lipschitz
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        validate_constants(self)
    }
}

/// Checks `0 < mu <= L`, `0 < tau <= r`, `xi >= 0` and `tau*mu - xi > 0`.
///
/// NaN in any field fails the first inequality it participates in.
pub fn validate_constants(c: &CompositeConstants) -> Result<(), EngineError> {
    let fail = |cond| Err(EngineError::ConditionViolated(cond));
    if !(c.mu > 0.0) {
        return fail(Condition::MuPositive);
    }
    if !(c.mu <= c.lipschitz) {
        return fail(Condition::MuAtMostLipschitz);
    }
    if !(c.tau > 0.0) {
        return fail(Condition::TauPositive);
    }
    if !(c.tau <= c.r) {
        return fail(Condition::TauAtMostR);
    }
    if !(c.xi >= 0.0) {
        return fail(Condition::XiNonNegative);
    }
    if !(c.curvature_gap() > 0.0) {
        return fail(Condition::CurvatureGap);
    }
    Ok(())
}

/// Constants after the change of variables `x' = lambda^(1/d1) x` for a homogeneous `B`:
/// `tau' = lambda^2 tau`, `xi' = lambda xi`, everything else unchanged.
pub fn homogeneous_rescale(
    lambda: f64,
    c: &CompositeConstants,
) -> Result<CompositeConstants, EngineError> {
    if !(lambda > 0.0) {
        return Err(EngineError::NonPositiveScale(lambda));
    }
    Ok(CompositeConstants {
        tau: lambda * lambda * c.tau,
        xi: lambda * c.xi,
        ..*c
    })
}

/// Derived iteration constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParameters {
    /// Relaxation weight, in `(0, 1]`.
    pub theta: f64,
    /// Extrapolation weight applied to `x^{k+1} - y^k` in the `z` update.
    pub alpha: f64,
    /// Weight of `|z - x*|^2` in the Lyapunov function.
    pub big_c: f64,
    /// Primal step `1/(rL)`.
    pub step: f64,
    /// `rL`; the gradient-mapping residual is `scale * |x^{k+1} - y^k|`.
    pub scale: f64,
}

pub fn compute_parameters(c: &CompositeConstants) -> Result<StepParameters, EngineError> {
    validate_constants(c)?;
    let gap = c.curvature_gap();
    let rl = c.scaled_lipschitz();
    let theta = ((gap * (rl - c.xi)).sqrt() / rl).min(1.0);
    let alpha = ((rl - c.xi) / gap).sqrt();
    Ok(StepParameters {
        theta,
        alpha,
        big_c: gap / 2.0,
        step: 1.0 / rl,
        scale: rl,
    })
}

impl StepParameters {
    pub fn with_overrides(mut self, overrides: &ParameterOverrides) -> Self {
        if let Some(theta) = overrides.theta {
            self.theta = theta;
        }
        if let Some(alpha) = overrides.alpha {
            self.alpha = alpha;
        }
        self
    }
}

/// Smooth part of the composite objective.
///
/// The engine only ever asks for the gradient pulled back through `B`,
/// `J_B(x)^T grad H(B(x))`, so it never forms the Jacobian.
pub trait CompositeOracle {
    fn dim(&self) -> usize;
    fn constants(&self) -> CompositeConstants;
    /// `H(B(x))`.
    fn smooth_value(&self, x: ArrayView1<f64>) -> f64;
    /// `J_B(x)^T grad H(B(x))`.
    fn pulled_back_gradient(&self, x: ArrayView1<f64>) -> Array1<f64>;
}

/// Nonsmooth part with an efficiently computable proximal map.
pub trait Regularizer {
    fn value(&self, x: ArrayView1<f64>) -> f64;
    /// `argmin_u 1/2 |u - v|^2 + t R(u)`.
    fn prox(&self, v: ArrayView1<f64>, t: f64) -> Array1<f64>;
}

impl<T: CompositeOracle + ?Sized> CompositeOracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn constants(&self) -> CompositeConstants {
        (**self).constants()
    }
    fn smooth_value(&self, x: ArrayView1<f64>) -> f64 {
        (**self).smooth_value(x)
    }
    fn pulled_back_gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        (**self).pulled_back_gradient(x)
    }
}

impl<T: Regularizer + ?Sized> Regularizer for &T {
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        (**self).value(x)
    }
    fn prox(&self, v: ArrayView1<f64>, t: f64) -> Array1<f64> {
        (**self).prox(v, t)
    }
}

/// `R = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoRegularizer;

impl Regularizer for NoRegularizer {
    fn value(&self, _x: ArrayView1<f64>) -> f64 {
        0.0
    }
    fn prox(&self, v: ArrayView1<f64>, _t: f64) -> Array1<f64> {
        v.to_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Array1<f64>,
    pub z: Array1<f64>,
    pub k: usize,
}

impl SolverState {
    pub fn new(x0: Array1<f64>, z0: Array1<f64>) -> Result<Self, EngineError> {
        if x0.len() != z0.len() {
            return Err(EngineError::DimensionMismatch {
                expected: x0.len(),
                found: z0.len(),
            });
        }
        Ok(SolverState { x: x0, z: z0, k: 0 })
    }

    pub fn zeros(n: usize) -> Self {
        SolverState {
            x: Array1::zeros(n),
            z: Array1::zeros(n),
            k: 0,
        }
    }
}

/// One row of a convergence trace, recorded after iteration `k` produced `x^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `F(x^k)`.
    pub objective: f64,
    /// `|x^k - y^{k-1}|`.
    pub step_norm: f64,
    /// Wall time since the solve started, in milliseconds.
    pub elapsed_ms: f64,
}

impl IterationRecord {
    /// Equality on everything except the wall-clock column.
    pub fn same_numerics(&self, other: &IterationRecord) -> bool {
        self.k == other.k
            && self.objective.to_bits() == other.objective.to_bits()
            && self.step_norm.to_bits() == other.step_norm.to_bits()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParameterOverrides {
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `rL * |x^{k+1} - y^k| <= tolerance`.
    pub tolerance: f64,
    pub record_trace: bool,
    pub overrides: ParameterOverrides,
    /// Also stop when the residual has not reached a new minimum for this many
    /// consecutive iterations. Used by reference runs whose tolerance sits below
    /// the floating-point floor of the residual.
    pub stall_window: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 10_000,
            tolerance: 1e-10,
            record_trace: true,
            overrides: ParameterOverrides::default(),
            stall_window: None,
        }
    }
}

impl SolverConfig {
    pub fn new(max_iters: usize, tolerance: f64) -> Self {
        SolverConfig {
            max_iters,
            tolerance,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Residual reached the tolerance.
    Converged,
    /// Residual stopped improving for `stall_window` iterations.
    Stalled,
    /// Iteration budget exhausted; state and trace are still returned.
    MaxItersExceeded,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub state: SolverState,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    pub params: StepParameters,
    /// Last gradient-mapping residual `rL * |x^k - y^{k-1}|`.
    pub residual: f64,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn iterations(&self) -> usize {
        self.state.k
    }
}

fn check_finite(v: &Array1<f64>, source: &'static str) -> Result<(), EngineError> {
    if v.iter().all(|e| e.is_finite()) {
        Ok(())
    } else {
        Err(EngineError::NonFiniteValue(source))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<(), EngineError> {
    if expected != found {
        Err(EngineError::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// One forward-backward step from `y`: `prox_{tR}(y - t g(y))` with `t = step`.
pub(crate) fn forward_backward<O, R>(
    y: ArrayView1<f64>,
    oracle: &O,
    reg: &R,
    step: f64,
) -> Result<Array1<f64>, EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    let grad = oracle.pulled_back_gradient(y);
    check_dim(y.len(), grad.len())?;
    check_finite(&grad, "oracle gradient")?;
    let mut point = grad;
    Zip::from(&mut point)
        .and(&y)
        .for_each(|g, &yi| *g = yi - step * *g);
    let next = reg.prox(point.view(), step);
    check_dim(y.len(), next.len())?;
    check_finite(&next, "prox")?;
    Ok(next)
}

pub(crate) fn distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    Zip::from(&a)
        .and(&b)
        .fold(0.0, |acc, &u, &v| acc + (u - v) * (u - v))
        .sqrt()
}

fn advance<O, R>(
    state: &SolverState,
    oracle: &O,
    reg: &R,
    p: &StepParameters,
) -> Result<(SolverState, f64), EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    check_dim(oracle.dim(), state.x.len())?;
    check_dim(oracle.dim(), state.z.len())?;
    let theta = p.theta;
    // y = x/(1+θ) + θz/(1+θ), written as x + w(z - x) so that x = z gives y = x exactly.
    let w = theta / (1.0 + theta);
    let mut y = state.x.clone();
    Zip::from(&mut y)
        .and(&state.z)
        .for_each(|yi, &zi| *yi += w * (zi - *yi));

    let x_next = forward_backward(y.view(), oracle, reg, p.step)?;
    let step_norm = distance(x_next.view(), y.view());

    let mut z_next = state.z.clone();
    Zip::from(&mut z_next)
        .and(&y)
        .and(&x_next)
        .for_each(|zi, &yi, &xi| {
            *zi = (1.0 - theta) * *zi + theta * yi + p.alpha * (xi - yi);
        });
    check_finite(&z_next, "z update")?;

    Ok((
        SolverState {
            x: x_next,
            z: z_next,
            k: state.k + 1,
        },
        step_norm,
    ))
}

/// A single iteration: extrapolate, prox-gradient step, momentum update.
pub fn step<O, R>(
    state: &SolverState,
    oracle: &O,
    reg: &R,
    p: &StepParameters,
) -> Result<SolverState, EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    advance(state, oracle, reg, p).map(|(s, _)| s)
}

pub fn objective<O, R>(oracle: &O, reg: &R, x: ArrayView1<f64>) -> f64
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    oracle.smooth_value(x) + reg.value(x)
}

/// Tracks the stopping rule shared by every first-order loop in the crate.
pub(crate) struct StopRule {
    tolerance: f64,
    stall_window: Option<usize>,
    best: f64,
    since_best: usize,
}

impl StopRule {
    pub(crate) fn new(cfg: &SolverConfig) -> Self {
        StopRule {
            tolerance: cfg.tolerance,
            stall_window: cfg.stall_window,
            best: f64::INFINITY,
            since_best: 0,
        }
    }

    pub(crate) fn check(&mut self, residual: f64) -> Option<Termination> {
        if residual <= self.tolerance {
            return Some(Termination::Converged);
        }
        if residual < self.best {
            self.best = residual;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        match self.stall_window {
            Some(w) if self.since_best >= w => Some(Termination::Stalled),
            _ => None,
        }
    }
}

pub fn solve<O, R>(
    oracle: &O,
    reg: &R,
    x0: Array1<f64>,
    z0: Array1<f64>,
    cfg: &SolverConfig,
) -> Result<Solution, EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    let record = cfg.record_trace;
    solve_with_observer(oracle, reg, x0, z0, cfg, record, |_, _| {})
}

/// Like [`solve`], but calls `observer` after every iteration with the new state.
///
/// When `evaluate_objective` is false the records carry `NaN` objectives and no
/// objective evaluations are spent.
pub fn solve_with_observer<O, R, F>(
    oracle: &O,
    reg: &R,
    x0: Array1<f64>,
    z0: Array1<f64>,
    cfg: &SolverConfig,
    evaluate_objective: bool,
    mut observer: F,
) -> Result<Solution, EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
    F: FnMut(&SolverState, &IterationRecord),
{
    if cfg.max_iters == 0 {
        return Err(EngineError::ZeroIterationBudget);
    }
    let params = compute_parameters(&oracle.constants())?.with_overrides(&cfg.overrides);
    let mut state = SolverState::new(x0, z0)?;
    check_dim(oracle.dim(), state.x.len())?;

    let start = Instant::now();
    let mut trace = Vec::new();
    let mut rule = StopRule::new(cfg);
    let mut termination = Termination::MaxItersExceeded;
    let mut residual = f64::INFINITY;

    for _ in 0..cfg.max_iters {
        let (next, step_norm) = advance(&state, oracle, reg, &params)?;
        state = next;
        residual = params.scale * step_norm;
        let rec = IterationRecord {
            k: state.k,
            objective: if evaluate_objective {
                objective(oracle, reg, state.x.view())
            } else {
                f64::NAN
            },
            step_norm,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        observer(&state, &rec);
        if cfg.record_trace {
            trace.push(rec);
        }
        if let Some(t) = rule.check(residual) {
            termination = t;
            break;
        }
    }

    Ok(Solution {
        state,
        trace,
        termination,
        params,
        residual,
    })
}

/// `(f_x - f_star) + big_c * |z - x_star|^2`.
pub fn lyapunov(
    z: ArrayView1<f64>,
    x_star: ArrayView1<f64>,
    f_x: f64,
    f_star: f64,
    big_c: f64,
) -> f64 {
    let d = distance(z, x_star);
    (f_x - f_star) + big_c * d * d
}

/// Settings for [`certify_linear_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateConfig {
    /// Multiplicative slack on every inequality, e.g. `1e-8`.
    pub relative_slack: f64,
    /// Iterations whose previous Lyapunov value is at or below this floor are not
    /// checked: the quantity is dominated by rounding there.
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub theta: f64,
    pub big_c: f64,
    /// Lyapunov values, index `k` for iterate `k` (index 0 is the starting point).
    pub lyapunov: Vec<f64>,
    /// Number of iterations whose contraction was checked.
    pub checked: usize,
    /// First `k` with `V(k+1) > (1-theta) V(k) (1+slack)`.
    pub contraction_violation: Option<usize>,
    /// First `k` with `F(x^k) - F* > (1-theta)^k V(0) (1+slack)`.
    pub envelope_violation: Option<usize>,
    /// Largest observed `V(k+1) / ((1-theta) V(k))` over checked iterations.
    pub worst_ratio: f64,
}

impl CertificateReport {
    pub fn contraction_holds(&self) -> bool {
        self.contraction_violation.is_none() && self.checked > 0
    }

    pub fn envelope_holds(&self) -> bool {
        self.envelope_violation.is_none() && self.checked > 0
    }
}

/// Replays a solve and checks the per-iteration Lyapunov contraction and the
/// geometric envelope on the objective gap against a known optimum.
///
/// The rate `theta` and weight `C` come from the parameters the solve actually used,
/// including overrides in `cfg`.
#[allow(clippy::too_many_arguments)]
pub fn certify_linear_rate<O, R>(
    oracle: &O,
    reg: &R,
    x0: Array1<f64>,
    z0: Array1<f64>,
    cfg: &SolverConfig,
    x_star: ArrayView1<f64>,
    f_star: f64,
    check: &CertificateConfig,
) -> Result<(CertificateReport, Solution), EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    check_dim(oracle.dim(), x_star.len())?;
    let params = compute_parameters(&oracle.constants())?.with_overrides(&cfg.overrides);
    // The bound is stated with C = (τμ−ξ)/2 regardless of a θ override.
    let big_c = params.big_c;
    let theta = params.theta;
    let rate = 1.0 - theta;
    let slack = 1.0 + check.relative_slack;

    let f0 = objective(oracle, reg, x0.view());
    let v0 = lyapunov(z0.view(), x_star, f0, f_star, big_c);
    let mut values = vec![v0];
    let mut checked = 0usize;
    let mut contraction_violation = None;
    let mut envelope_violation = None;
    let mut worst_ratio = 0.0f64;
    let mut envelope = v0;
    let mut active = v0 > check.noise_floor;

    let solution = solve_with_observer(oracle, reg, x0, z0, cfg, true, |state, rec| {
        let prev = *values.last().expect("seeded with V(0)");
        let v = lyapunov(state.z.view(), x_star, rec.objective, f_star, big_c);
        values.push(v);
        envelope *= rate;
        if !active {
            return;
        }
        if prev <= check.noise_floor {
            active = false;
            return;
        }
        checked += 1;
        let bound = rate * prev;
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(v / bound);
        } else if v > 0.0 {
            worst_ratio = f64::INFINITY;
        }
        if v > bound * slack && v > check.noise_floor && contraction_violation.is_none() {
            contraction_violation = Some(rec.k - 1);
        }
        let gap = rec.objective - f_star;
        if gap > envelope * slack && gap > check.noise_floor && envelope_violation.is_none() {
            envelope_violation = Some(rec.k);
        }
    })?;

    Ok((
        CertificateReport {
            theta,
            big_c,
            lyapunov: values,
            checked,
            contraction_violation,
            envelope_violation,
            worst_ratio,
        },
        solution,
    ))
}
