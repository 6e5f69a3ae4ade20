//! Proximal gradient (ISTA) and vanilla FISTA, for comparison with the accelerated engine.
//!
//! Both loops use the engine's stopping rule, residual (`L * |x+ - y|`) and
//! [`IterationRecord`] trace so their output can be overlaid on an engine run.

use std::time::Instant;

use ndarray::Array1;

use crate::engine::{
    distance, forward_backward, objective, CompositeOracle, EngineError, IterationRecord,
    Regularizer, SolverConfig, StopRule, Termination,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub x: Array1<f64>,
    pub x_prev: Array1<f64>,
    /// Momentum parameter, always at least 1.
    pub t: f64,
}

impl MomentumState {
    pub fn new(x0: Array1<f64>) -> Self {
        MomentumState {
            x_prev: x0.clone(),
            x: x0,
            t: 1.0,
        }
    }
}

fn check_lipschitz(l: f64) -> Result<(), EngineError> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(EngineError::NonPositiveScale(l))
    }
}

/// `prox_{R/L}(x - g(x)/L)`.
pub fn ista_step<O, R>(
    x: &Array1<f64>,
    oracle: &O,
    reg: &R,
    lipschitz: f64,
) -> Result<Array1<f64>, EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    check_lipschitz(lipschitz)?;
    forward_backward(x.view(), oracle, reg, 1.0 / lipschitz)
}

fn next_t(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

fn fista_advance<O, R>(
    s: &MomentumState,
    oracle: &O,
    reg: &R,
    lipschitz: f64,
) -> Result<(MomentumState, f64), EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    check_lipschitz(lipschitz)?;
    let t_next = next_t(s.t);
    let w = (s.t - 1.0) / t_next;
    let y = if w == 0.0 {
        s.x.clone()
    } else {
        &s.x + &((&s.x - &s.x_prev) * w)
    };
    let x_next = forward_backward(y.view(), oracle, reg, 1.0 / lipschitz)?;
    let step_norm = distance(x_next.view(), y.view());
    Ok((
        MomentumState {
            x_prev: s.x.clone(),
            x: x_next,
            t: t_next,
        },
        step_norm,
    ))
}

/// One FISTA step: extrapolate by `(t-1)/t+`, then a prox-gradient step.
pub fn fista_step<O, R>(
    s: &MomentumState,
    oracle: &O,
    reg: &R,
    lipschitz: f64,
) -> Result<MomentumState, EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    fista_advance(s, oracle, reg, lipschitz).map(|(s, _)| s)
}

#[derive(Debug, Clone)]
pub struct BaselineSolution {
    pub x: Array1<f64>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    pub residual: f64,
    pub lipschitz: f64,
}

impl BaselineSolution {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn run<O, R, S, F>(
    oracle: &O,
    reg: &R,
    mut state: S,
    cfg: &SolverConfig,
    mut advance: F,
    current: fn(&S) -> &Array1<f64>,
) -> Result<BaselineSolution, EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
    F: FnMut(&S, f64) -> Result<(S, f64), EngineError>,
{
    if cfg.max_iters == 0 {
        return Err(EngineError::ZeroIterationBudget);
    }
    let lipschitz = oracle.constants().scaled_lipschitz();
    check_lipschitz(lipschitz)?;
    if current(&state).len() != oracle.dim() {
        return Err(EngineError::DimensionMismatch {
            expected: oracle.dim(),
            found: current(&state).len(),
        });
    }
    let start = Instant::now();
    let mut rule = StopRule::new(cfg);
    let mut trace = Vec::new();
    let mut termination = Termination::MaxItersExceeded;
    let mut residual = f64::INFINITY;
    let mut k = 0;
    while k < cfg.max_iters {
        let (next, step_norm) = advance(&state, lipschitz)?;
        state = next;
        k += 1;
        residual = lipschitz * step_norm;
        if cfg.record_trace {
            trace.push(IterationRecord {
                k,
                objective: objective(oracle, reg, current(&state).view()),
                step_norm,
                elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
        if let Some(t) = rule.check(residual) {
            termination = t;
            break;
        }
    }
    Ok(BaselineSolution {
        x: current(&state).clone(),
        iterations: k,
        trace,
        termination,
        residual,
        lipschitz,
    })
}

/// ISTA with step `1/(rL)` taken from the oracle's constants.
pub fn solve_ista<O, R>(
    oracle: &O,
    reg: &R,
    x0: Array1<f64>,
    cfg: &SolverConfig,
) -> Result<BaselineSolution, EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    run(
        oracle,
        reg,
        x0,
        cfg,
        |x: &Array1<f64>, l| {
            let next = ista_step(x, oracle, reg, l)?;
            let d = distance(next.view(), x.view());
            Ok((next, d))
        },
        |x| x,
    )
}

/// Vanilla FISTA with step `1/(rL)`; ignores strong convexity.
pub fn solve_fista<O, R>(
    oracle: &O,
    reg: &R,
    x0: Array1<f64>,
    cfg: &SolverConfig,
) -> Result<BaselineSolution, EngineError>
where
    O: CompositeOracle + ?Sized,
    R: Regularizer + ?Sized,
{
    run(
        oracle,
        reg,
        MomentumState::new(x0),
        cfg,
        |s: &MomentumState, l| fista_advance(s, oracle, reg, l),
        |s| &s.x,
    )
}
