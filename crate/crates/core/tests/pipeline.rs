use cfista::data::{generate, load_dataset, save_dataset, GenSpec};
use cfista::engine::{SolverConfig, Termination};
use cfista::models::{
    estimate_spectral_bounds, solve_gl, solve_sgl, solve_sglr, split_intercept, LassoFlavor,
    LassoProblem, LogisticProblem,
};
use ndarray::Array1;

fn support_groups(x: &Array1<f64>, size: usize) -> Vec<usize> {
    (0..x.len() / size)
        .filter(|g| (g * size..(g + 1) * size).any(|i| x[i].abs() > 1e-9))
        .collect()
}

#[test]
fn group_lasso_recovers_planted_groups_from_disk() {
    let spec = GenSpec::lasso(400, 200, 10, 11);
    let d = generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&d, dir.path()).unwrap();
    let d = load_dataset(dir.path()).unwrap();

    let [g1, _] = d.meta.gamma_defaults.gl;
    let k = estimate_spectral_bounds(d.a.view(), 1e-13, 1_000_000)
        .unwrap()
        .into();
    let p = LassoProblem::new(
        d.a.clone(),
        d.response.clone(),
        d.groups.clone(),
        g1,
        0.0,
        LassoFlavor::Gl,
    )
    .unwrap();
    let sol = solve_gl(&p, k, &SolverConfig::new(10_000, 1e-9)).unwrap();
    assert_eq!(sol.termination, Termination::Converged);
    assert_eq!(
        support_groups(&sol.state.x, 10),
        (0..10).collect::<Vec<_>>()
    );
    let err = (&sol.state.x - &d.planted_x)
        .mapv(f64::abs)
        .fold(0.0f64, |a, &b| a.max(b));
    assert!(err < 0.05, "max deviation from the planted signal {err}");

    let obj: Vec<f64> = sol.trace.iter().map(|r| r.objective).collect();
    assert!(obj.last().unwrap() <= &obj[0]);
}

#[test]
fn sparse_group_lasso_is_sparser_within_groups() {
    let d = generate(&GenSpec::lasso(300, 200, 20, 5)).unwrap();
    let k = estimate_spectral_bounds(d.a.view(), 1e-13, 1_000_000)
        .unwrap()
        .into();
    let cfg = SolverConfig::new(20_000, 1e-9);
    let [g1, g2] = d.meta.gamma_defaults.sgl;
    let gl = LassoProblem::new(
        d.a.clone(),
        d.response.clone(),
        d.groups.clone(),
        g1,
        0.0,
        LassoFlavor::Gl,
    )
    .unwrap();
    let sgl = LassoProblem::new(
        d.a.clone(),
        d.response.clone(),
        d.groups.clone(),
        g1,
        g2,
        LassoFlavor::Sgl,
    )
    .unwrap();
    let a = solve_gl(&gl, k, &cfg).unwrap();
    let b = solve_sgl(&sgl, k, &cfg).unwrap();
    assert!(a.converged() && b.converged());
    let nnz = |x: &Array1<f64>| x.iter().filter(|v| v.abs() > 1e-9).count();
    assert_eq!(nnz(&a.state.x), 200);
    assert!(nnz(&b.state.x) < 150, "{} nonzeros", nnz(&b.state.x));
    assert!(d
        .planted_x
        .iter()
        .zip(&b.state.x)
        .all(|(p, x)| *p == 0.0 || x.abs() > 1e-9));
}

#[test]
fn logistic_pipeline_converges_and_fits_labels() {
    let d = generate(&GenSpec::logistic(60, 40, 10, 9)).unwrap();
    let [g1, g2] = d.meta.gamma_defaults.sglr;
    let p =
        LogisticProblem::new(d.a.clone(), d.response.clone(), d.groups.clone(), g1, g2).unwrap();
    let l = p.default_lipschitz().unwrap();
    let sol = solve_sglr(&p, 1e-3 * l, l, &SolverConfig::new(100_000, 1e-8)).unwrap();
    assert!(sol.converged());
    let (w, b) = split_intercept(&sol.state.x);
    let correct =
        d.a.dot(&w)
            .iter()
            .zip(&d.response)
            .filter(|(t, y)| (*t + b) * **y > 0.0)
            .count();
    assert!(correct > 45, "{correct} of 60 training labels");
}
