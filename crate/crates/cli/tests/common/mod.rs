//! Independent oracles used by the acceptance and integration tests.

#![allow(dead_code)]

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

/// One term of a consensus split: `argmin_x t*f(x) + 1/2 |x - v|^2`.
pub enum Term {
    /// `1/2 |x - d|^2`.
    Quadratic(Vec<f64>),
    /// `gamma * |x(idx)|_2`.
    GroupNorm { idx: Vec<usize>, gamma: f64 },
    /// `gamma * |x|_1`.
    L1(f64),
}

impl Term {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Term::Quadratic(d) => {
                0.5 * x.iter().zip(d).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            Term::GroupNorm { idx, gamma } => {
                gamma * idx.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
            }
            Term::L1(gamma) => gamma * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    /// The prox via the Moreau decomposition `v - P_C(v)` for the norm terms, where
    /// `C` is the dual-norm ball: a Euclidean ball or a box.
    fn prox(&self, v: &[f64], t: f64) -> Vec<f64> {
        match self {
            Term::Quadratic(d) => v
                .iter()
                .zip(d)
                .map(|(vi, di)| (vi + t * di) / (1.0 + t))
                .collect(),
            Term::GroupNorm { idx, gamma } => {
                let r = t * gamma;
                let norm = idx.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
                let mut out = v.to_vec();
                let scale = if norm <= r { 1.0 } else { r / norm };
                for &i in idx {
                    out[i] = v[i] - scale * v[i];
                }
                out
            }
            Term::L1(gamma) => {
                let r = t * gamma;
                v.iter().map(|&vi| vi - vi.clamp(-r, r)).collect()
            }
        }
    }
}

pub fn split_objective(terms: &[Term], x: &[f64]) -> f64 {
    terms.iter().map(|t| t.value(x)).sum()
}

/// Consensus ADMM on `sum_i f_i(x)`; returns the consensus point after the primal and
/// dual residuals drop below `tol` (or after `max_iter` sweeps).
pub fn consensus_admm(terms: &[Term], n: usize, rho: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let k = terms.len();
    let mut xs = vec![vec![0.0; n]; k];
    let mut us = vec![vec![0.0; n]; k];
    let mut z = vec![0.0; n];
    for _ in 0..max_iter {
        for i in 0..k {
            let v: Vec<f64> = (0..n).map(|j| z[j] - us[i][j]).collect();
            xs[i] = terms[i].prox(&v, 1.0 / rho);
        }
        let z_old = z.clone();
        for j in 0..n {
            z[j] = (0..k).map(|i| xs[i][j] + us[i][j]).sum::<f64>() / k as f64;
        }
        let mut primal = 0.0f64;
        for i in 0..k {
            for j in 0..n {
                let r = xs[i][j] - z[j];
                us[i][j] += r;
                primal = primal.max(r.abs());
            }
        }
        let dual = (0..n).map(|j| (z[j] - z_old[j]).abs()).fold(0.0, f64::max) * rho;
        if primal <= tol && dual <= tol {
            break;
        }
    }
    z
}

/// `(lambda_min, lambda_max)` of `A^T A` from a dense symmetric eigensolver.
pub fn gram_extremes(a: &Array2<f64>) -> (f64, f64) {
    let (m, n) = a.dim();
    let mat = DMatrix::from_fn(m, n, |i, j| a[[i, j]]);
    let gram = mat.transpose() * &mat;
    let eig = SymmetricEigen::new(gram);
    let values = eig.eigenvalues;
    (values.min(), values.max())
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_gradient(f: impl Fn(&Array1<f64>) -> f64, x: &Array1<f64>, h: f64) -> Array1<f64> {
    let mut g = Array1::zeros(x.len());
    for i in 0..x.len() {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[i] += h;
        dn[i] -= h;
        g[i] = (f(&up) - f(&dn)) / (2.0 * h);
    }
    g
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Runs the command-line entry point in-process and returns its exit code.
pub fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["cfista"];
    argv.extend_from_slice(args);
    cfista_cli::run(argv)
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// First iteration whose gap column is at most `level`.
pub fn first_gap_below(trace: &Path, level: f64) -> Option<usize> {
    let text = std::fs::read_to_string(trace).ok()?;
    cfista_cli::output::parse_trace(&text)
        .ok()?
        .into_iter()
        .find(|r| r.gap.is_some_and(|g| g <= level))
        .map(|r| r.iter)
}
