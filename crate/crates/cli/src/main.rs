//! `relaxlab`: structural checks, limit comparisons, eps sweeps and the
//! randomized general-model validator from the command line.
//!
//! Exit status: 0 success, 1 a check or assertion failed, 2 usage or
//! configuration error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use relaxlab_core::criteria::{
    check_all, limit_study, validate_theorem4, SamplePlan, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_SPACINGS,
    LIMIT_TOLERANCE, SCHEMA_VERSION,
};
use relaxlab_core::harness::{persist_result, run_sweep, Norm, SweepConfig};
use relaxlab_core::solver::{Scheme, WInit};
use relaxlab_core::{build_model, BuiltModel, Error, ModelOptions};

const DEFAULT_OUT: &str = "relaxlab-out";
const DEFAULT_TRIALS: usize = 100;
const DEFAULT_DIMS: [[usize; 3]; 3] = [[2, 1, 1], [2, 2, 2], [3, 2, 2]];

#[derive(Parser, Debug)]
#[command(name = "relaxlab", version, about = "Verification laboratory for relaxation approximations")]
struct Cli {
    /// TOML or JSON run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true, env = "RELAXLAB_OUT")]
    out: Option<PathBuf>,
    /// Seed for every sampled quantity.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check conditions (i)-(v) on sampled states.
    Check(CheckArgs),
    /// Compare the extracted limit operator with the target system.
    Limit(LimitArgs),
    /// Run an eps sweep and fit the convergence order.
    Sweep(SweepArgs),
    /// Validate randomly generated general hyperbolic-parabolic models.
    #[command(name = "validate-theorem4")]
    ValidateTheorem4(TheoremArgs),
    /// Run the command named in the configuration file.
    Run,
}

#[derive(Args, Debug, Default)]
struct ModelArg {
    /// `<name>` or `<name>:<preset>`.
    model: Option<String>,
    /// Multiplier on the LBE relaxation time.
    #[arg(long)]
    tau_scale: Option<f64>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long)]
    samples: Option<usize>,
    /// Relaxation parameters to test (0 is always added).
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Tolerance override, e.g. `--tol symmetry=1e-6`.
    #[arg(long = "tol", value_parser = config::parse_tolerance)]
    tol: Vec<(String, f64)>,
}

#[derive(Args, Debug)]
struct LimitArgs {
    #[command(flatten)]
    model: ModelArg,
    /// Accepted relative discrepancy at the finest spacing.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    spacings: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Cells per axis.
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    norm: Option<Norm>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    cfl: Option<f64>,
    /// Zero initial relaxed variables instead of the well-prepared ones.
    #[arg(long)]
    zero_w: bool,
    /// Record wall-clock times in the outputs.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct TheoremArgs {
    #[arg(long)]
    trials: Option<usize>,
    /// Dimension triple `m,s,d`; repeat for several.
    #[arg(long, value_parser = config::parse_dims)]
    dims: Vec<[usize; 3]>,
    /// Flip the sign of the dissipation matrix (must fail).
    #[arg(long)]
    mutate: bool,
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::UnknownModel(_) | Error::UnknownSolution(_) | Error::Io { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Check(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn merge(cli: Cli) -> Result<(String, RunConfig), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let apply_model = |m: ModelArg, cfg: &mut RunConfig| {
        if m.model.is_some() {
            cfg.model = m.model;
        }
        if m.tau_scale.is_some() {
            cfg.tau_scale = m.tau_scale;
        }
    };
    let command = match cli.command {
        Command::Check(a) => {
            apply_model(a.model, &mut cfg);
            cfg.samples = a.samples.or(cfg.samples);
            cfg.eps = a.eps.or(cfg.eps);
            cfg.tolerances.extend(a.tol);
            "check"
        }
        Command::Limit(a) => {
            apply_model(a.model, &mut cfg);
            cfg.tolerance = a.tolerance.or(cfg.tolerance);
            cfg.spacings = a.spacings.or(cfg.spacings);
            "limit"
        }
        Command::Sweep(a) => {
            apply_model(a.model, &mut cfg);
            cfg.eps = a.eps.or(cfg.eps);
            cfg.cells = a.cells.or(cfg.cells);
            cfg.t_end = a.t_end.or(cfg.t_end);
            cfg.norm = a.norm.or(cfg.norm);
            cfg.scheme = a.scheme.or(cfg.scheme);
            cfg.cfl = a.cfl.or(cfg.cfl);
            if a.zero_w {
                cfg.winit = Some(WInit::Zero);
            }
            if a.timing {
                cfg.timing = Some(true);
            }
            "sweep"
        }
        Command::ValidateTheorem4(a) => {
            cfg.trials = a.trials.or(cfg.trials);
            if !a.dims.is_empty() {
                cfg.dims = Some(a.dims);
            }
            if a.mutate {
                cfg.mutate = Some(true);
            }
            "validate-theorem4"
        }
        Command::Run => {
            return match cfg.command.clone() {
                Some(c) => Ok((c, cfg)),
                None => Err(Failure::Usage("`run` needs a configuration file with a `command` key".into())),
            }
        }
    };
    Ok((command.to_string(), cfg))
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn file_stem(id: &str) -> String {
    id.replace(':', "_")
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn model(cfg: &RunConfig) -> Result<BuiltModel, Failure> {
    let id = cfg
        .model
        .as_deref()
        .ok_or_else(|| Failure::Usage("no model given".into()))?;
    Ok(build_model(id, ModelOptions { tau_scale: cfg.tau_scale })?)
}

fn cmd_check(cfg: &RunConfig) -> Outcome {
    let built = model(cfg)?;
    let m = built.model.as_ref();
    let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let plan = match &cfg.eps {
        Some(eps) => SamplePlan::with_eps(m, samples, seed, eps)?,
        None => SamplePlan::for_model(m, samples, seed)?,
    };
    let tol = config::tolerances(&cfg.tolerances).map_err(Failure::Usage)?;
    let report = check_all(m, &plan, &tol);

    println!("{}  ({} samples, seed {}, eps {:?})", built.id(), samples, seed, report.eps_values);
    println!("{:<6} {:<7} {:>12} {:>10}  detail", "cond", "verdict", "metric", "tol");
    for r in &report.results {
        let verdict = if r.passed() { "pass" } else { "FAIL" };
        println!(
            "{:<6} {:<7} {:>12.3e} {:>10.1e}  {}",
            r.condition.label(),
            verdict,
            r.metric,
            r.tolerance,
            r.detail
        );
    }
    let path = out_dir(cfg).join(format!("check-{}.json", file_stem(&built.id())));
    write_text(&path, &(report.to_json()? + "\n"))?;
    println!("report: {}", path.display());
    Ok(report.all_pass())
}

fn cmd_limit(cfg: &RunConfig) -> Outcome {
    let built = model(cfg)?;
    let tolerance = cfg.tolerance.unwrap_or(LIMIT_TOLERANCE);
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Failure::Usage(format!("tolerance must be positive, got {tolerance}")));
    }
    let spacings = cfg.spacings.clone().unwrap_or_else(|| DEFAULT_SPACINGS.to_vec());
    let field = |x: &[f64]| (built.initial)(x, 0.0);
    let study = limit_study(built.model.as_ref(), &built.target, &field, &spacings, tolerance)?;

    println!("{}  limit comparison on {} points", built.id(), relaxlab_core::criteria::LIMIT_POINTS);
    println!("{:>8} {:>12} {:>12} {:>12}", "h", "mismatch", "advection", "diffusion");
    for c in &study.comparisons {
        println!(
            "{:>8} {:>12.3e} {:>12.3e} {:>12.3e}",
            c.h,
            c.residual_mismatch,
            c.advection_mismatch.iter().copied().fold(0.0, f64::max),
            c.diffusion_mismatch.iter().flatten().copied().fold(0.0, f64::max)
        );
    }
    match study.observed_order {
        Some(p) => println!("observed order {p:.3}"),
        None => println!("observed order: all mismatches below the noise floor"),
    }
    println!(
        "finest mismatch {:.3e} vs tolerance {:.1e}: {}",
        study.finest(),
        tolerance,
        if study.passed() { "pass" } else { "FAIL" }
    );
    let json = serde_json::json!({ "schema_version": SCHEMA_VERSION, "study": study, "passed": study.passed() });
    let path = out_dir(cfg).join(format!("limit-{}.json", file_stem(&built.id())));
    write_text(&path, &(serde_json::to_string_pretty(&json).expect("serializable") + "\n"))?;
    println!("report: {}", path.display());
    Ok(study.passed())
}

fn cmd_sweep(cfg: &RunConfig) -> Outcome {
    let id = cfg.model.clone().ok_or_else(|| Failure::Usage("no model given".into()))?;
    let mut sweep = SweepConfig::new(id);
    if let Some(e) = &cfg.eps {
        sweep.eps = e.clone();
    }
    sweep.cells = cfg.cells;
    sweep.t_end = cfg.t_end.unwrap_or(sweep.t_end);
    sweep.norm = cfg.norm.unwrap_or(sweep.norm);
    sweep.scheme = cfg.scheme.unwrap_or(sweep.scheme);
    sweep.cfl = cfg.cfl.unwrap_or(sweep.cfl);
    sweep.winit = cfg.winit.unwrap_or(sweep.winit);
    sweep.seed = cfg.seed.unwrap_or(sweep.seed);
    sweep.tau_scale = cfg.tau_scale;
    sweep.timing = cfg.timing.unwrap_or(false);

    let result = run_sweep(&sweep)?;
    println!("{}  t_end {}  {:?} norm  {} ({:?} limit)", result.model_id, sweep.t_end, sweep.norm, sweep.scheme, result.limit);
    println!("{:>10} {:>12} {:>12} {:>8}", "eps", "error", "dt", "steps");
    for p in &result.points {
        match (p.error, &p.failure) {
            (Some(e), _) => println!("{:>10} {:>12.4e} {:>12.4e} {:>8}", p.eps, e, p.dt, p.steps),
            (None, f) => println!("{:>10} {:>12} {}", p.eps, "FAILED", f.as_deref().unwrap_or("")),
        }
    }
    match result.fit {
        Some(f) => println!("slope {:.4}  intercept {:.4}  residual {:.2e}", f.slope, f.intercept, f.residual),
        None => println!("slope: not enough successful runs"),
    }
    if !result.monotone {
        println!("note: errors are not monotone in eps");
    }
    let dir = out_dir(cfg).join(format!("sweep-{}", file_stem(&result.model_id)));
    let (csv, manifest) = persist_result(&result, &dir)?;
    println!("wrote {} and {}", csv.display(), manifest.display());
    if result.diverged {
        eprintln!("error: at least one run diverged");
    }
    println!("{}", if result.passed() { "pass" } else { "FAIL" });
    Ok(result.passed())
}

fn cmd_theorem4(cfg: &RunConfig) -> Outcome {
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let dims: Vec<(usize, usize, usize)> = cfg
        .dims
        .clone()
        .unwrap_or_else(|| DEFAULT_DIMS.to_vec())
        .into_iter()
        .map(|[m, s, d]| (m, s, d))
        .collect();
    let report = validate_theorem4(trials, seed, &dims, cfg.mutate.unwrap_or(false))?;
    println!(
        "{} / {} trials passed (seed {}, dims {:?}{})",
        report.passed,
        report.trials,
        seed,
        dims,
        if report.mutated { ", mutated" } else { "" }
    );
    println!("max z10a residual {:.2e}, max z10b residual {:.2e}", report.max_z10a, report.max_z10b);
    if let Some(bad) = report.outcomes.iter().find(|o| !o.passed) {
        println!(
            "first failure: trial {} (seed {}, dims {:?}): {}",
            bad.trial,
            bad.seed,
            bad.dims,
            bad.detail.as_deref().unwrap_or("")
        );
    }
    let path = out_dir(cfg).join("theorem4.json");
    write_text(&path, &(report.to_json()? + "\n"))?;
    println!("report: {}", path.display());
    Ok(report.all_pass())
}

fn dispatch(command: &str, cfg: &RunConfig) -> Outcome {
    match command {
        "check" => cmd_check(cfg),
        "limit" => cmd_limit(cfg),
        "sweep" => cmd_sweep(cfg),
        "validate-theorem4" => cmd_theorem4(cfg),
        other => Err(Failure::Usage(format!("unknown command `{other}`"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = merge(cli).and_then(|(command, cfg)| dispatch(&command, &cfg));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
