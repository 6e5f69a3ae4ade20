//! Extreme eigenvalues of `A^T A` by power iteration.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    /// Estimate of `lambda_min(A^T A)`.
    pub mu: f64,
    /// Estimate of `lambda_max(A^T A)`.
    pub lipschitz: f64,
    /// Power iterations spent across both stages.
    pub iters_used: usize,
    /// Last relative change of the Rayleigh quotient, `|rq_k - rq_{k-1}| / lambda_max`,
    /// taken as the larger of the two stages.
    pub residual: f64,
    pub converged: bool,
}

/// Symmetric positive semidefinite operator `v -> A^T A v`. The Gram matrix is formed
/// once when that is cheaper than two products with `A` per application.
enum Gram<'a> {
    Dense(Array2<f64>),
    Factored(ArrayView2<'a, f64>),
}

impl<'a> Gram<'a> {
    fn new(a: ArrayView2<'a, f64>) -> Self {
        let (m, n) = a.dim();
        if m >= n {
            Gram::Dense(a.t().dot(&a))
        } else {
            Gram::Factored(a)
        }
    }

    fn dim(&self) -> usize {
        match self {
            Gram::Dense(g) => g.nrows(),
            Gram::Factored(a) => a.ncols(),
        }
    }

    fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        match self {
            Gram::Dense(g) => g.dot(&v),
            Gram::Factored(a) => a.t().dot(&a.dot(&v)),
        }
    }
}

struct PowerResult {
    value: f64,
    iters: usize,
    change: f64,
    converged: bool,
}

fn normalized_ones(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / (n as f64).sqrt())
}

/// Power iteration on `shift*I - G` (or `G` when `shift` is `None`). Stops when
/// successive Rayleigh quotients differ by at most `tol * scale`, where `scale` defaults
/// to the current quotient.
fn power_iteration(
    gram: &Gram<'_>,
    shift: Option<f64>,
    start: Array1<f64>,
    tol: f64,
    scale: Option<f64>,
    max_iters: usize,
) -> PowerResult {
    let apply = |v: &Array1<f64>| -> Array1<f64> {
        let gv = gram.apply(v.view());
        match shift {
            Some(s) => v * s - gv,
            None => gv,
        }
    };
    let mut v = start;
    let mut prev = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 1..=max_iters {
        let w = apply(&v);
        let rq = v.dot(&w) / v.dot(&v);
        change = (rq - prev).abs();
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            // v lies in the null space of the operator.
            return PowerResult {
                value: 0.0,
                iters: it,
                change: 0.0,
                converged: true,
            };
        }
        if change <= tol * scale.unwrap_or(rq) {
            return PowerResult {
                value: rq,
                iters: it,
                change,
                converged: true,
            };
        }
        prev = rq;
        v = w / wn;
    }
    PowerResult {
        value: prev,
        iters: max_iters,
        change,
        converged: false,
    }
}

/// Largest eigenvalue of `A^T A` only; the flag reports convergence.
pub fn estimate_lambda_max(
    a: ArrayView2<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<(f64, bool), ModelError> {
    check_nonzero(a)?;
    let gram = Gram::new(a);
    let top = top_eigenvalue(&gram, tol, max_iters);
    Ok((top.value, top.converged))
}

fn check_nonzero(a: ArrayView2<f64>) -> Result<(), ModelError> {
    if a.is_empty() || a.iter().all(|&v| v == 0.0) {
        Err(ModelError::ZeroMatrix)
    } else {
        Ok(())
    }
}

fn top_eigenvalue(gram: &Gram<'_>, tol: f64, max_iters: usize) -> PowerResult {
    let n = gram.dim();
    let first = power_iteration(gram, None, normalized_ones(n), tol, None, max_iters);
    if first.value > 0.0 {
        return first;
    }
    // All-ones is annihilated by a nonzero A^T A: restart from the coordinate with the
    // largest diagonal entry.
    let best = (0..n)
        .map(|i| {
            let mut e = Array1::zeros(n);
            e[i] = 1.0;
            (i, gram.apply(e.view())[i])
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(i, _)| i);
    let mut e = Array1::zeros(n);
    e[best] = 1.0;
    let mut retry = power_iteration(gram, None, e, tol, None, max_iters);
    retry.iters += first.iters;
    retry
}

/// `lambda_max` by power iteration on `A^T A` from the normalized all-ones vector, then
/// `lambda_min = lambda_max - lambda_max(lambda_max I - A^T A)`. Each stage stops when
/// successive Rayleigh quotients differ by at most `tol * lambda_max`.
pub fn estimate_spectral_bounds(
    a: ArrayView2<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<SpectralBounds, ModelError> {
    check_nonzero(a)?;
    let gram = Gram::new(a);
    let top = top_eigenvalue(&gram, tol, max_iters);
    let lmax = top.value;
    let shifted = power_iteration(
        &gram,
        Some(lmax),
        normalized_ones(gram.dim()),
        tol,
        Some(lmax),
        max_iters,
    );
    let mu = (lmax - shifted.value).clamp(0.0, lmax);
    Ok(SpectralBounds {
        mu,
        lipschitz: lmax,
        iters_used: top.iters + shifted.iters,
        residual: top.change.max(shifted.change) / lmax,
        converged: top.converged && shifted.converged,
    })
}
