//! Loading a dataset and turning it into a solvable model.

use std::path::Path;

use cfista::baselines::{solve_fista, solve_ista, BaselineSolution};
use cfista::data::{load_dataset, Dataset, ModelKind};
use cfista::engine::{
    self, CompositeOracle, Regularizer, Solution, SolverConfig, StepParameters, Termination,
};
use cfista::models::{
    estimate_spectral_bounds, ConstantsView, LassoConstants, LassoFlavor, LassoProblem,
    LogisticProblem,
};
use cfista::prox::OverlapSolverConfig;
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Gl,
    Sgl,
    Osgl,
    Sglr,
}

impl Flavor {
    fn lasso(self) -> Option<LassoFlavor> {
        match self {
            Flavor::Gl => Some(LassoFlavor::Gl),
            Flavor::Sgl => Some(LassoFlavor::Sgl),
            Flavor::Osgl => Some(LassoFlavor::Osgl),
            Flavor::Sglr => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cfista,
    Ista,
    Fista,
}

/// Model choices shared by every command that solves.
#[derive(Debug, Clone, clap::Args)]
pub struct ModelArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: std::path::PathBuf,
    /// Model flavor; inferred from the dataset and penalties when omitted.
    #[arg(long, value_enum)]
    pub flavor: Option<Flavor>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Strong convexity constant; estimated when omitted.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Lipschitz constant; estimated when omitted.
    #[arg(long)]
    pub lipschitz: Option<f64>,
    /// Stopping tolerance of the inner dual solve for overlapping groups.
    #[arg(long, default_value_t = 1e-12)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub inner_max_iter: usize,
}

/// Everything needed to rebuild the same problem later, e.g. from a reference file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub flavor: Flavor,
    pub gamma1: f64,
    pub gamma2: f64,
    pub mu: f64,
    pub lipschitz: f64,
}

pub enum Model {
    Lasso(LassoProblem),
    Logistic(LogisticProblem),
}

pub struct Loaded {
    pub dataset: Dataset,
    pub model: Model,
    pub settings: ModelSettings,
    pub inner: OverlapSolverConfig,
}

/// Logistic fits get this fraction of `L` as `mu` unless one is supplied.
const DEFAULT_MU_FRACTION: f64 = 1e-3;

pub fn infer_flavor(kind: ModelKind, overlapping: bool, gamma2: Option<f64>) -> Flavor {
    match kind {
        ModelKind::Logistic => Flavor::Sglr,
        ModelKind::Lasso if overlapping => Flavor::Osgl,
        ModelKind::Lasso => match gamma2 {
            Some(g) if g != 0.0 => Flavor::Sgl,
            _ => Flavor::Gl,
        },
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!(
            "--{name} must be positive, got {v}"
        )))
    }
}

pub fn load(args: &ModelArgs) -> Result<Loaded, CliError> {
    let dataset = load_dataset(Path::new(&args.data))?;
    let kind = dataset.meta.spec.model;
    let flavor = args
        .flavor
        .unwrap_or_else(|| infer_flavor(kind, !dataset.groups.disjoint(), args.gamma2));
    if (flavor == Flavor::Sglr) != (kind == ModelKind::Logistic) {
        return Err(CliError::Usage(format!(
            "flavor {flavor:?} does not fit a {kind:?} dataset"
        )));
    }
    let table = dataset.meta.gamma_defaults;
    let defaults = match flavor {
        Flavor::Gl => table.gl,
        Flavor::Sgl => table.sgl,
        Flavor::Osgl => table.osgl,
        Flavor::Sglr => table.sglr,
    };
    let gamma1 = args.gamma1.unwrap_or(defaults[0]);
    let gamma2 = args.gamma2.unwrap_or(defaults[1]);
    let inner = OverlapSolverConfig {
        tol: positive("inner-tol", args.inner_tol)?,
        max_inner: args.inner_max_iter.max(1),
    };
    let a = dataset.a.clone();
    let response = dataset.response.clone();
    let groups = dataset.groups.clone();

    let (model, mu, lipschitz) = match flavor.lasso() {
        Some(lf) => {
            let p = LassoProblem::new(a, response, groups, gamma1, gamma2, lf)?;
            let (mu, l) = match (args.mu, args.lipschitz) {
                (Some(mu), Some(l)) => (mu, l),
                (mu, l) => {
                    let b = estimate_spectral_bounds(p.a().view(), 1e-13, 1_000_000)?;
                    if !b.converged {
                        eprintln!("warning: spectral estimate did not converge");
                    }
                    (mu.unwrap_or(b.mu), l.unwrap_or(b.lipschitz))
                }
            };
            (Model::Lasso(p), mu, l)
        }
        None => {
            let p = LogisticProblem::new(a, response, groups, gamma1, gamma2)?;
            let l = match args.lipschitz {
                Some(l) => l,
                None => p.default_lipschitz()?,
            };
            let mu = match args.mu {
                Some(mu) => mu,
                None => {
                    eprintln!(
                        "warning: no --mu given; using {DEFAULT_MU_FRACTION:e} * L, the logistic loss is not strongly convex in general"
                    );
                    DEFAULT_MU_FRACTION * l
                }
            };
            (Model::Logistic(p), mu, l)
        }
    };
    Ok(Loaded {
        dataset,
        model,
        settings: ModelSettings {
            flavor,
            gamma1,
            gamma2,
            mu,
            lipschitz,
        },
        inner,
    })
}

/// Result of any of the three algorithms in one shape.
pub struct Outcome {
    pub x: Array1<f64>,
    pub z: Option<Array1<f64>>,
    pub records: Vec<engine::IterationRecord>,
    pub termination: Termination,
    pub iterations: usize,
    pub residual: f64,
    pub params: Option<StepParameters>,
    pub initial_objective: f64,
}

impl From<Solution> for Outcome {
    fn from(s: Solution) -> Self {
        Outcome {
            iterations: s.iterations(),
            x: s.state.x,
            z: Some(s.state.z),
            records: s.trace,
            termination: s.termination,
            residual: s.residual,
            params: Some(s.params),
            initial_objective: f64::NAN,
        }
    }
}

impl From<BaselineSolution> for Outcome {
    fn from(s: BaselineSolution) -> Self {
        Outcome {
            x: s.x,
            z: None,
            records: s.trace,
            termination: s.termination,
            iterations: s.iterations,
            residual: s.residual,
            params: None,
            initial_objective: f64::NAN,
        }
    }
}

fn run_generic<O, R>(
    alg: Algorithm,
    oracle: &O,
    reg: &R,
    cfg: &SolverConfig,
) -> Result<Outcome, CliError>
where
    O: CompositeOracle,
    R: Regularizer,
{
    let x0 = Array1::zeros(oracle.dim());
    let f0 = engine::objective(oracle, reg, x0.view());
    let mut out: Outcome = match alg {
        Algorithm::Cfista => engine::solve(oracle, reg, x0.clone(), x0, cfg)?.into(),
        Algorithm::Ista => solve_ista(oracle, reg, x0, cfg)?.into(),
        Algorithm::Fista => solve_fista(oracle, reg, x0, cfg)?.into(),
    };
    out.initial_objective = f0;
    Ok(out)
}

impl Loaded {
    pub fn lasso_constants(&self) -> LassoConstants {
        LassoConstants {
            mu: self.settings.mu,
            lipschitz: self.settings.lipschitz,
        }
    }

    /// The engine refuses `mu <= 0` itself; a numerically singular Gram matrix is
    /// refused here as well so that the accelerated method never runs on it.
    fn check_conditioning(&self, alg: Algorithm) -> Result<(), CliError> {
        if alg == Algorithm::Cfista {
            if let Model::Lasso(_) = self.model {
                let k = self.lasso_constants();
                if !(k.mu > 1e-12 * k.lipschitz) {
                    return Err(CliError::Engine(engine::EngineError::ConditionViolated(
                        engine::Condition::MuPositive,
                    )));
                }
            }
        }
        Ok(())
    }

    /// Runs `alg` from zero; `observer` is given a chance to wrap the engine run.
    pub fn run(&self, alg: Algorithm, cfg: &SolverConfig) -> Result<Outcome, CliError> {
        self.check_conditioning(alg)?;
        match &self.model {
            Model::Lasso(p) => {
                let oracle = p.oracle(self.lasso_constants(), ConstantsView::Identity);
                let pen = p.penalty(self.inner);
                run_generic(alg, &oracle, &pen, cfg)
            }
            Model::Logistic(p) => {
                let oracle = p.oracle(self.settings.mu, self.settings.lipschitz);
                let pen = p.penalty();
                run_generic(alg, &oracle, &pen, cfg)
            }
        }
    }

    pub fn objective(&self, x: &Array1<f64>) -> f64 {
        match &self.model {
            Model::Lasso(p) => {
                let oracle = p.oracle(self.lasso_constants(), ConstantsView::Identity);
                engine::objective(&oracle, &p.penalty(self.inner), x.view())
            }
            Model::Logistic(p) => {
                let oracle = p.oracle(self.settings.mu, self.settings.lipschitz);
                engine::objective(&oracle, &p.penalty(), x.view())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match &self.model {
            Model::Lasso(p) => p.n(),
            Model::Logistic(p) => p.n() + 1,
        }
    }

    /// Replays the accelerated method and evaluates the Lyapunov certificate.
    pub fn certify(
        &self,
        cfg: &SolverConfig,
        x_star: &Array1<f64>,
        f_star: f64,
        check: &engine::CertificateConfig,
    ) -> Result<(engine::CertificateReport, Solution), CliError> {
        self.check_conditioning(Algorithm::Cfista)?;
        let x0 = Array1::zeros(self.dim());
        let res = match &self.model {
            Model::Lasso(p) => {
                let oracle = p.oracle(self.lasso_constants(), ConstantsView::Identity);
                let pen = p.penalty(self.inner);
                engine::certify_linear_rate(
                    &oracle,
                    &pen,
                    x0.clone(),
                    x0,
                    cfg,
                    x_star.view(),
                    f_star,
                    check,
                )?
            }
            Model::Logistic(p) => {
                let oracle = p.oracle(self.settings.mu, self.settings.lipschitz);
                let pen = p.penalty();
                engine::certify_linear_rate(
                    &oracle,
                    &pen,
                    x0.clone(),
                    x0,
                    cfg,
                    x_star.view(),
                    f_star,
                    check,
                )?
            }
        };
        Ok(res)
    }
}
