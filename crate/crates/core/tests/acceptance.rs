//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per criterion
//! (with indented detail lines underneath) and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;

use relaxlab_core::criteria::{
    check_all, gen_theorem4_instance, limit_study, negative_controls, validate_theorem4, z10_residuals, Condition,
    SamplePlan, Tolerances, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_SPACINGS,
};
use relaxlab_core::harness::{persist_result, run_sweep, SweepConfig, MANIFEST_JSON, SLOPE_WINDOW, SWEEP_CSV};
use relaxlab_core::models::{
    build_kinetic_bgk, default_builtins, lbe_equilibrium, lbe_transformation_matrix, KineticBgkSpec, LBE_VELOCITIES,
};
use relaxlab_core::solver::{relax_initial, solve_relax, Grid, Scheme, TimePlan, WInit};
use relaxlab_core::{build_model, ModelOptions};

const CHECK_BUDGET: Duration = Duration::from_secs(10);
const SWEEP_BUDGET: Duration = Duration::from_secs(60);
const THEOREM4_BUDGET: Duration = Duration::from_secs(30);
const LIMIT_TOLERANCE: f64 = 1e-5;
const TAU_DETECTION: f64 = 1e-2;
const IDENTITY_TOLERANCE: f64 = 1e-10;
const ROUND_OFF: f64 = 1e-14;
const CONSERVATION_TOLERANCE: f64 = 1e-12;

struct Outcome {
    passed: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Self { passed, summary: summary.into(), details: Vec::new() }
    }

    fn with(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }
}

fn certification() -> Outcome {
    let tol = Tolerances::default();
    let start = Instant::now();
    let mut failing = Vec::new();
    let mut details = Vec::new();
    for id in default_builtins() {
        let built = build_model(id, ModelOptions::default()).expect("builtin builds");
        let m = built.model.as_ref();
        let plan = SamplePlan::for_model(m, DEFAULT_SAMPLES, DEFAULT_SEED).expect("sample plan");
        let report = check_all(m, &plan, &tol);
        if !report.all_pass() {
            failing.push(format!("{id} {:?}", report.failed()));
        }
        details.push(format!("{id}: {}", if report.all_pass() { "pass" } else { "FAIL" }));
    }
    let elapsed = start.elapsed();
    let passed = failing.is_empty() && elapsed < CHECK_BUDGET && tol.symmetry <= 1e-8 && tol.eigen_ratio >= 1e-10;
    Outcome::new(
        passed,
        format!(
            "{} builtins certified for (i)-(v) at {DEFAULT_SAMPLES} states in {:.2} s (budget {} s){}",
            default_builtins().len() - failing.len(),
            elapsed.as_secs_f64(),
            CHECK_BUDGET.as_secs(),
            if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) }
        ),
    )
    .with(details)
}

fn negative() -> Outcome {
    let tol = Tolerances::default();
    let mut details = Vec::new();
    let mut passed = true;
    for control in negative_controls() {
        let plan = SamplePlan::for_model(&control.model, DEFAULT_SAMPLES, DEFAULT_SEED).expect("sample plan");
        let failed = check_all(&control.model, &plan, &tol).failed();
        let exact = failed == vec![control.violates];
        passed &= exact;
        details.push(format!("control ({}): fails {:?}{}", control.violates, failed, if exact { "" } else { "  <- expected exactly this one" }));
    }
    let built = build_model("cde1d", ModelOptions::default()).expect("cde1d builds");
    let m = built.model.as_ref();
    // eps_max already carries a 0.9 safety factor; 1.5 eps_max is past the bound
    let eps = 1.5 * m.eps_max();
    let plan = SamplePlan::with_eps(m, DEFAULT_SAMPLES, DEFAULT_SEED, &[eps]).expect("sample plan");
    let failed = check_all(m, &plan, &tol).failed();
    let sub = failed.contains(&Condition::Iii);
    passed &= sub;
    details.push(format!("cde1d at eps = {eps:.3} (beyond the subcharacteristic bound): fails {failed:?}"));
    Outcome::new(passed, "each condition has a control failing exactly it; cde1d fails (iii) past the subcharacteristic bound")
        .with(details)
}

fn limit() -> Outcome {
    let mut details = Vec::new();
    let mut passed = true;
    for id in default_builtins() {
        let built = build_model(id, ModelOptions::default()).expect("builtin builds");
        let field = |x: &[f64]| (built.initial)(x, 0.0);
        let study = limit_study(built.model.as_ref(), &built.target, &field, &DEFAULT_SPACINGS, LIMIT_TOLERANCE)
            .expect("limit study runs");
        passed &= study.passed();
        details.push(format!(
            "{id}: finest mismatch {:.2e}, order {}",
            study.finest(),
            study.observed_order.map_or("below noise floor".to_string(), |p| format!("{p:.3}"))
        ));
    }
    for scale in [1.1, 0.5] {
        let built = build_model("lbe-d2q5", ModelOptions { tau_scale: Some(scale) }).expect("lbe builds");
        let field = |x: &[f64]| (built.initial)(x, 0.0);
        let study = limit_study(built.model.as_ref(), &built.target, &field, &DEFAULT_SPACINGS, LIMIT_TOLERANCE)
            .expect("limit study runs");
        let detected = study.finest() > TAU_DETECTION;
        passed &= detected;
        details.push(format!("lbe-d2q5 tau x {scale}: mismatch {:.2e} ({})", study.finest(), if detected { "detected" } else { "MISSED" }));
    }
    Outcome::new(passed, format!("limit mismatch <= {LIMIT_TOLERANCE:.0e} at order >= 2 for every builtin; mistuned LBE tau detected"))
        .with(details)
}

fn eps_convergence() -> Outcome {
    let mut details = Vec::new();
    let mut passed = true;
    for id in ["cde1d:burgers", "nldiff:cubic", "lbe-d2q5:linear", "viscous-cons:scalar"] {
        let cfg = SweepConfig::new(id);
        let start = Instant::now();
        let result = run_sweep(&cfg);
        let elapsed = start.elapsed();
        match result {
            Ok(res) => {
                let ok = res.passed() && res.monotone && elapsed < SWEEP_BUDGET;
                passed &= ok;
                let errors: Vec<String> =
                    res.errors().iter().map(|e| e.map_or("-".into(), |e| format!("{e:.2e}"))).collect();
                details.push(format!(
                    "{id}: slope {} {}, errors [{}], {:.1} s{}",
                    res.slope().map_or("n/a".into(), |s| format!("{s:.3}")),
                    if res.monotone { "monotone" } else { "NOT monotone" },
                    errors.join(", "),
                    elapsed.as_secs_f64(),
                    if ok { "" } else { "  <- FAIL" }
                ));
            }
            Err(e) => {
                passed = false;
                details.push(format!("{id}: sweep failed: {e}"));
            }
        }
    }
    if !passed {
        details.push(
            "note: with well-prepared data the observed rate is O(eps^2), above the O(eps) bound; \
             the first-order bound holds but the slope window is exceeded. For lbe-d2q5 at 128^2 the \
             O(h^2/eps) spatial error dominates and the errors are not monotone."
                .into(),
        );
    }
    Outcome::new(
        passed,
        format!("eps-sweep slopes in [{}, {}] with monotone errors, each sweep < {} s", SLOPE_WINDOW.0, SLOPE_WINDOW.1, SWEEP_BUDGET.as_secs()),
    )
    .with(details)
}

fn theorem4() -> Outcome {
    let dims = [(2, 1, 1), (2, 2, 2), (3, 2, 2)];
    let start = Instant::now();
    let report = validate_theorem4(100, DEFAULT_SEED, &dims, false).expect("validator runs");
    let elapsed = start.elapsed();
    let mutant = validate_theorem4(100, DEFAULT_SEED, &dims, true).expect("validator runs");
    let passed = report.all_pass() && !mutant.all_pass() && elapsed < THEOREM4_BUDGET;
    Outcome::new(
        passed,
        format!(
            "{}/100 random instances satisfy (a)(b)(c) and (i)-(v) in {:.2} s; sign-flipped mutant passes {}/100",
            report.passed,
            elapsed.as_secs_f64(),
            mutant.passed
        ),
    )
}

fn structural() -> Outcome {
    let mut details = Vec::new();
    let det_lbe = (lbe_transformation_matrix().determinant() - 1.0).abs();
    let (kinetic, _) = build_kinetic_bgk(KineticBgkSpec::scalar_default()).expect("kinetic builds");
    let det_kin = [0.2, 0.5, 1.0, 1.7]
        .iter()
        .map(|&u| (kinetic.transformation_matrix(&DVector::from_element(1, u)).determinant() - 1.0).abs())
        .fold(0.0, f64::max);
    details.push(format!("|det P - 1|: lbe {det_lbe:.1e}, kinetic {det_kin:.1e}"));

    let mut moment = 0.0_f64;
    for &(u, eps, f) in &[(0.3, 0.1, [0.5, -0.2]), (1.7, 0.01, [2.0, 3.0]), (-0.8, 0.5, [-1.0, 0.25])] {
        let g = lbe_equilibrium(u, eps, f);
        let sum: f64 = g.iter().sum();
        moment = moment.max((sum - u).abs() / u.abs().max(1.0));
        for dir in 0..2 {
            let first: f64 = g.iter().zip(LBE_VELOCITIES.iter()).map(|(gi, xi)| gi * xi[dir]).sum();
            moment = moment.max((first - eps * f[dir]).abs() / (eps * f[dir]).abs().max(1.0));
        }
    }
    details.push(format!("lbe equilibrium moment defect {moment:.1e}"));

    let mut z10 = 0.0_f64;
    for (k, &(m, s, d)) in [(2, 1, 1), (2, 2, 2), (3, 2, 2)].iter().enumerate() {
        for trial in 0..5u64 {
            let spec = gen_theorem4_instance(DEFAULT_SEED + 10 * k as u64 + trial, m, s, d).expect("instance");
            for u in [0.1, 0.5, 0.9] {
                let (a, b) = z10_residuals(&spec, &DVector::from_element(m, u));
                z10 = z10.max(a).max(b);
            }
        }
    }
    details.push(format!("general-hp relation residual {z10:.1e}"));
    let passed = det_lbe <= IDENTITY_TOLERANCE && det_kin <= IDENTITY_TOLERANCE && moment <= ROUND_OFF && z10 <= IDENTITY_TOLERANCE;
    Outcome::new(passed, "det P = 1, LBE equilibrium moments and general-hp relations hold").with(details)
}

fn conservation_and_determinism() -> Outcome {
    let mut details = Vec::new();
    let mut passed = true;
    for id in default_builtins() {
        let built = build_model(id, ModelOptions::default()).expect("builtin builds");
        let m = built.model.as_ref();
        if !m.conservative_u_rows() {
            details.push(format!("{id}: quasilinear u rows, conservation not claimed"));
            continue;
        }
        let grid = Grid::periodic(m.dims().d(), 24).expect("grid");
        let eps = 0.5 * m.eps_max().min(0.1);
        let init = relax_initial(m, &grid, |x| (built.initial)(x, 0.0), eps, WInit::WellPrepared).expect("initial data");
        for scheme in [Scheme::Imex1, Scheme::Imex2] {
            let plan = TimePlan::new(0.02, 0.5, scheme).expect("plan");
            let run = solve_relax(m, &init, eps, &plan).expect("run completes");
            let ok = run.conservation_defect <= CONSERVATION_TOLERANCE;
            passed &= ok;
            details.push(format!("{id} {scheme}: {} steps, defect {:.1e}", run.steps, run.conservation_defect));
        }
    }

    let mut cfg = SweepConfig::new("cde1d:burgers");
    cfg.cells = Some(32);
    cfg.t_end = 0.02;
    let dirs = [tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir")];
    for dir in &dirs {
        persist_result(&run_sweep(&cfg).expect("sweep"), dir.path()).expect("persist");
    }
    let same_files = [SWEEP_CSV, MANIFEST_JSON].iter().all(|f| {
        std::fs::read(dirs[0].path().join(f)).expect("read") == std::fs::read(dirs[1].path().join(f)).expect("read")
    });
    let dims = [(2, 1, 1), (3, 2, 2)];
    let t4 = |_| validate_theorem4(10, DEFAULT_SEED, &dims, false).expect("validator").to_json().expect("json");
    let same_t4 = t4(()) == t4(());
    let built = build_model("nldiff:cubic-2d", ModelOptions::default()).expect("builds");
    let plan = SamplePlan::for_model(built.model.as_ref(), DEFAULT_SAMPLES, DEFAULT_SEED).expect("plan");
    let check = |_| check_all(built.model.as_ref(), &plan, &Tolerances::default()).to_json().expect("json");
    let same_check = check(()) == check(());
    details.push(format!("byte-identical reruns: sweep files {same_files}, theorem-4 report {same_t4}, check report {same_check}"));
    passed &= same_files && same_t4 && same_check;
    Outcome::new(passed, format!("grid sum of u conserved to {CONSERVATION_TOLERANCE:.0e}; identical seeds give identical outputs"))
        .with(details)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("criteria certification", certification),
        ("negative controls", negative),
        ("limit-equation oracle", limit),
        ("eps-convergence", eps_convergence),
        ("theorem-4 validator", theorem4),
        ("structural identities", structural),
        ("conservation and determinism", conservation_and_determinism),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        println!("[{}] {}. {name}: {}", if outcome.passed { "PASS" } else { "FAIL" }, k + 1, outcome.summary);
        for line in &outcome.details {
            println!("      {line}");
        }
        if !outcome.passed {
            failures += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
