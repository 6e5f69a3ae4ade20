use std::time::Instant;

use cfista::data::{generate, save_dataset, GenSpec, ModelKind};
use cfista::engine::{
    compute_parameters, CertificateConfig, CompositeConstants, ParameterOverrides, SolverConfig,
    Termination,
};

use crate::output::{
    manifest_path, read_reference, render_trace, write_atomic, write_json, ConstantsUsed,
    Reference, RunManifest,
};
use crate::problem::{load, Algorithm, ModelArgs};
use crate::{exit, CheckArgs, CliError, Command, GenArgs, ReferenceArgs, SolveArgs};

pub fn dispatch(cmd: Command, echo: &[String]) -> Result<i32, CliError> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a, echo),
        Command::Reference(a) => reference(a),
        Command::Check(a) => check(a),
    }
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::Stalled => "stalled",
        Termination::MaxItersExceeded => "max_iters_exceeded",
    }
}

fn gen(a: GenArgs) -> Result<i32, CliError> {
    let model: ModelKind = a.model.into();
    let (m, n) = match model {
        ModelKind::Lasso => (800, 400),
        ModelKind::Logistic => (100, 500),
    };
    let spec = GenSpec {
        m: a.m.unwrap_or(m),
        n: a.n.unwrap_or(n),
        group_size: a.group_size,
        overlap_stride: a.overlap_stride,
        delta: a.delta,
        seed: a.seed,
        model,
    };
    let d = generate(&spec)?;
    save_dataset(&d, &a.out)?;
    println!("{}", a.out.display());
    Ok(exit::SUCCESS)
}

fn solver_config(
    max_iter: usize,
    tol: f64,
    stall: Option<usize>,
) -> Result<SolverConfig, CliError> {
    if !(tol >= 0.0) {
        return Err(CliError::Usage(format!(
            "--tol must be nonnegative, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(CliError::Usage("--max-iter must be positive".into()));
    }
    Ok(SolverConfig {
        stall_window: stall,
        ..SolverConfig::new(max_iter, tol)
    })
}

fn solve(a: SolveArgs, echo: &[String]) -> Result<i32, CliError> {
    let cfg = solver_config(a.max_iter, a.tol, a.stall_window)?;
    let loaded = load(&a.model)?;
    let f_star = match &a.reference {
        Some(p) => {
            let r = read_reference(p)?;
            if r.model.flavor != loaded.settings.flavor
                || r.model.gamma1 != loaded.settings.gamma1
                || r.model.gamma2 != loaded.settings.gamma2
            {
                eprintln!("warning: reference was computed for different model settings");
            }
            Some(r.objective)
        }
        None => None,
    };
    let start = Instant::now();
    let out = loaded.run(a.algorithm, &cfg)?;
    let wall = start.elapsed().as_secs_f64() * 1e3;
    let final_objective = out
        .records
        .last()
        .map_or(out.initial_objective, |r| r.objective);
    let code = if out.termination == Termination::Converged {
        exit::SUCCESS
    } else {
        exit::NOT_CONVERGED
    };
    if let Some(path) = &a.trace {
        write_atomic(
            path,
            render_trace(&out.records, f_star, a.timing).as_bytes(),
        )?;
        let manifest = RunManifest {
            command_line: echo.to_vec(),
            dataset: a.model.data.clone(),
            algorithm: a.algorithm,
            model: loaded.settings,
            constants: ConstantsUsed {
                mu: loaded.settings.mu,
                lipschitz: loaded.settings.lipschitz,
                theta: out.params.map(|p| p.theta),
                alpha: out.params.map(|p| p.alpha),
                big_c: out.params.map(|p| p.big_c),
            },
            tolerance: a.tol,
            iterations: out.iterations,
            termination: termination_name(out.termination).into(),
            final_objective,
            final_residual: out.residual,
            wall_time_ms: wall,
            exit_status: code,
        };
        write_json(&manifest_path(path), &manifest)?;
    }
    println!(
        "{:?} {:?}: {} after {} iterations, objective {:e}, residual {:e}",
        a.algorithm,
        loaded.settings.flavor,
        termination_name(out.termination),
        out.iterations,
        final_objective,
        out.residual
    );
    Ok(code)
}

fn reference(a: ReferenceArgs) -> Result<i32, CliError> {
    let cfg = SolverConfig {
        record_trace: false,
        ..solver_config(a.max_iter, a.tol, Some(a.stall_window.max(1)))?
    };
    let loaded = load(&a.model)?;
    let out = loaded.run(Algorithm::Cfista, &cfg)?;
    let objective = loaded.objective(&out.x);
    let r = Reference {
        dataset: a.model.data.clone(),
        model: loaded.settings,
        objective,
        x: out.x.to_vec(),
        iterations: out.iterations,
        termination: termination_name(out.termination).into(),
        residual: out.residual,
        tolerance: a.tol,
    };
    write_json(&a.out, &r)?;
    println!(
        "reference objective {:e} ({} after {} iterations, residual {:e})",
        objective,
        termination_name(out.termination),
        out.iterations,
        out.residual
    );
    match out.termination {
        Termination::Converged => Ok(exit::SUCCESS),
        Termination::Stalled => {
            eprintln!(
                "warning: residual stopped improving at {:e}, above the tolerance {:e}",
                out.residual, a.tol
            );
            Ok(exit::SUCCESS)
        }
        Termination::MaxItersExceeded => Ok(exit::NOT_CONVERGED),
    }
}

fn check(a: CheckArgs) -> Result<i32, CliError> {
    let r: Reference = read_reference(&a.reference)?;
    let model_args = ModelArgs {
        data: a.data.clone(),
        flavor: Some(r.model.flavor),
        gamma1: Some(r.model.gamma1),
        gamma2: Some(r.model.gamma2),
        mu: Some(a.mu.unwrap_or(r.model.mu)),
        lipschitz: Some(a.lipschitz.unwrap_or(r.model.lipschitz)),
        inner_tol: a.inner_tol,
        inner_max_iter: a.inner_max_iter,
    };
    let loaded = load(&model_args)?;
    if r.x.len() != loaded.dim() {
        return Err(CliError::Usage(format!(
            "reference has {} entries, the model has {}",
            r.x.len(),
            loaded.dim()
        )));
    }
    let params = compute_parameters(&CompositeConstants::identity_map(
        loaded.settings.mu,
        loaded.settings.lipschitz,
    ))?;
    let mut cfg = solver_config(a.max_iter, a.tol, Some(a.stall_window.max(1)))?;
    cfg.record_trace = false;
    if let Some(s) = a.theta_scale {
        cfg.overrides = ParameterOverrides {
            theta: Some(params.theta * s),
            alpha: None,
        };
    }
    let x_star = ndarray::Array1::from(r.x.clone());
    let f0 = loaded.objective(&ndarray::Array1::zeros(loaded.dim()));
    let v0 = f0 - r.objective + params.big_c * x_star.dot(&x_star);
    let check = CertificateConfig {
        relative_slack: a.slack,
        noise_floor: a.noise_factor * v0.abs(),
    };
    let (report, _) = loaded.certify(&cfg, &x_star, r.objective, &check)?;
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "contraction: {} (theta {:e}, {} iterations checked, worst ratio {:.12}{})",
        verdict(report.contraction_holds()),
        report.theta,
        report.checked,
        report.worst_ratio,
        report
            .contraction_violation
            .map(|k| format!(", first violation at k={k}"))
            .unwrap_or_default()
    );
    println!(
        "envelope: {}{}",
        verdict(report.envelope_holds()),
        report
            .envelope_violation
            .map(|k| format!(" (first violation at k={k})"))
            .unwrap_or_default()
    );
    if report.contraction_holds() && report.envelope_holds() {
        Ok(exit::SUCCESS)
    } else {
        Err(CliError::CheckFailed)
    }
}
