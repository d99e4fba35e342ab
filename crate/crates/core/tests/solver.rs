use nalgebra::DVector;

use relaxlab_core::harness::{grid_halving_check, run_sweep, LimitSource, SweepConfig};
use relaxlab_core::models::{build_cde1d, Cde1dSpec};
use relaxlab_core::solver::{
    relax_initial, sample_solution, solve_relax, solve_target_reference, step_relax, ExactSolution, Grid, GridField,
    Scheme, TimePlan, WInit,
};
use relaxlab_core::{build_model, Error, ModelOptions};

#[test]
fn constant_state_is_a_steady_state() {
    let (m, _) = build_cde1d(Cde1dSpec::linear_heat()).unwrap();
    let grid = Grid::periodic(1, 32).unwrap();
    let init = relax_initial(&m, &grid, |_| DVector::from_element(1, 1.3), 0.1, WInit::WellPrepared).unwrap();
    for scheme in [Scheme::Imex1, Scheme::Imex2] {
        let run = solve_relax(&m, &init, 0.1, &TimePlan::new(0.05, 0.9, scheme).unwrap()).unwrap();
        let drift = run.field.values().iter().zip(init.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-14, "{scheme}: {drift:e}");
    }
}

#[test]
fn large_stiff_step_relaxes_w_towards_equilibrium() {
    let built = build_model("cde1d:burgers", ModelOptions::default()).unwrap();
    let m = built.model.as_ref();
    let grid = Grid::periodic(1, 16).unwrap();
    let eps = 0.01;
    // w far from eps w_1; with dt / eps^2 large one step lands near eps f(u)
    let init = GridField::from_fn(grid, 2, |x| DVector::from_vec(vec![1.0 + 0.2 * x[0].sin(), 0.4])).unwrap();
    let (next, dt) = step_relax(m, &init, eps, &TimePlan::new(1.0, 0.5, Scheme::Imex1).unwrap()).unwrap();
    assert!(dt / (eps * eps) > 1.0);
    for c in 0..16 {
        let cell = next.cell(c);
        assert!((cell[1] - eps * 0.5 * cell[0] * cell[0]).abs() < 0.05, "cell {c}: {cell:?}");
    }
}

#[test]
fn runs_end_exactly_and_conserve_u() {
    let built = build_model("nldiff:cubic-2d", ModelOptions::default()).unwrap();
    let m = built.model.as_ref();
    let grid = Grid::periodic(2, 16).unwrap();
    let init = relax_initial(m, &grid, |x| (built.initial)(x, 0.0), 0.05, WInit::Zero).unwrap();
    let run = solve_relax(m, &init, 0.05, &TimePlan::new(0.013, 0.5, Scheme::Imex2).unwrap()).unwrap();
    assert_eq!(run.t, 0.013);
    assert!(run.conservation_defect < 1e-12, "{:e}", run.conservation_defect);
    assert!(run.stiffness_final < run.stiffness_initial.max(1e-3));
}

#[test]
fn invalid_inputs_are_rejected() {
    let (m, _) = build_cde1d(Cde1dSpec::linear_heat()).unwrap();
    let grid = Grid::periodic(1, 16).unwrap();
    let init = relax_initial(&m, &grid, |_| DVector::from_element(1, 1.0), 0.1, WInit::Zero).unwrap();
    let plan = TimePlan::new(0.1, 0.5, Scheme::Imex2).unwrap();
    assert!(matches!(solve_relax(&m, &init, 0.0, &plan), Err(Error::Config(_))));
    assert!(TimePlan::new(0.1, 1.5, Scheme::Imex2).is_err());
    assert!(TimePlan::new(-1.0, 0.5, Scheme::Imex2).is_err());
    let wrong_width = GridField::from_fn(grid, 3, |_| DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
    assert!(solve_relax(&m, &wrong_width, 0.1, &plan).is_err());
}

#[test]
fn reference_solver_matches_heat_decay() {
    let (_, target) = build_cde1d(Cde1dSpec::linear_heat()).unwrap();
    let grid = Grid::periodic(1, 512).unwrap();
    let exact = ExactSolution::HeatSine { mean: 0.0, amp: 1.0, diffusion: 1.0 };
    let init = sample_solution(&grid, 1, &exact.callback(), 0.0).unwrap();
    let out = solve_target_reference(&target, &init, 0.1).unwrap();
    let want = sample_solution(&grid, 1, &exact.callback(), 0.1).unwrap();
    let err = out.values().iter().zip(want.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-3, "{err:e}");
    assert!(matches!(ExactSolution::by_name("nosuch"), Err(Error::UnknownSolution(_))));
}

#[test]
fn linear_heat_sweep_uses_exact_limit_and_converges() {
    let cfg = SweepConfig::new("cde1d:linear-heat");
    let res = run_sweep(&cfg).unwrap();
    assert_eq!(res.limit, LimitSource::Exact);
    assert!(res.monotone && !res.diverged);
    // the errors shrink at least linearly in eps
    assert!(res.slope().unwrap() >= 0.8, "{:?}", res.slope());
    assert!(res.max_conservation_defect() < 1e-12);
}

#[test]
fn reference_limit_and_grid_halving() {
    let mut cfg = SweepConfig::new("cde1d:burgers");
    cfg.cells = Some(64);
    cfg.t_end = 0.02;
    let res = run_sweep(&cfg).unwrap();
    assert!(matches!(res.limit, LimitSource::Reference { factor } if factor % 2 == 1));
    let check = grid_halving_check(&cfg, 0.1).unwrap();
    assert!(check.coarse > 0.0 && check.fine > 0.0);
    assert!(check.relative_change.is_finite());
}

#[test]
fn sweep_validation() {
    let mut cfg = SweepConfig::new("cde1d");
    cfg.eps = vec![0.1, 0.05];
    assert!(matches!(run_sweep(&cfg), Err(Error::Config(_))));
    cfg.eps = vec![0.1, 0.2, 0.05];
    assert!(run_sweep(&cfg).is_err());
    let model = build_model("cde1d", ModelOptions::default()).unwrap();
    cfg.eps = vec![2.0 * model.model.eps_max(), 0.05, 0.025];
    assert!(run_sweep(&cfg).is_err());
    assert!(matches!(run_sweep(&SweepConfig::new("nosuch")), Err(Error::UnknownModel(_))));
}
