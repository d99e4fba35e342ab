use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_order, Fit};
use crate::error::{Error, Result};
use crate::models::{build_model, BuiltModel, ModelOptions};
use crate::solver::{
    relax_initial, sample_solution, solve_relax, solve_target_reference, Grid, GridField, Scheme, TimePlan, WInit,
};

/// Accepted window for the fitted order in `eps`.
pub const SLOPE_WINDOW: (f64, f64) = (0.8, 1.3);
/// Default `eps` values of a sweep.
pub const DEFAULT_EPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];
/// Refinement factor of the reference grid (odd, so that cell centers coincide).
pub const REFERENCE_FACTOR: usize = 5;
/// Largest relative error change accepted by the grid-halving check.
pub const GRID_CHANGE_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Linf,
    L2,
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linf" => Ok(Self::Linf),
            "l2" => Ok(Self::L2),
            other => Err(Error::Config(format!("unknown norm `{other}` (expected linf or l2)"))),
        }
    }
}

/// An `eps` sweep of one registry model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `"<name>"` or `"<name>:<preset>"`.
    pub model: String,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Cells per axis; defaults to 256 in 1D and 128 otherwise.
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub winit: WInit,
    /// Recorded in the manifest; the sweep itself draws no random numbers.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tau_scale: Option<f64>,
    /// Record wall-clock times (makes the outputs run-dependent).
    #[serde(default)]
    pub timing: bool,
}

fn default_eps() -> Vec<f64> {
    DEFAULT_EPS.to_vec()
}

fn default_t_end() -> f64 {
    0.1
}

fn default_cfl() -> f64 {
    0.5
}

fn default_seed() -> u64 {
    crate::criteria::DEFAULT_SEED
}

impl SweepConfig {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            eps: default_eps(),
            cells: None,
            t_end: default_t_end(),
            norm: Norm::default(),
            scheme: Scheme::default(),
            cfl: default_cfl(),
            winit: WInit::default(),
            seed: default_seed(),
            tau_scale: None,
            timing: false,
        }
    }

    fn build(&self) -> Result<BuiltModel> {
        build_model(&self.model, ModelOptions { tau_scale: self.tau_scale })
    }

    pub fn cells_for(&self, d: usize) -> usize {
        self.cells.unwrap_or(if d == 1 { 256 } else { 128 })
    }

    /// Checks the `eps` list against the model and the plan parameters.
    pub fn validate(&self, built: &BuiltModel) -> Result<()> {
        if self.eps.len() < 3 {
            return Err(Error::Config(format!("a sweep needs at least 3 eps values, got {}", self.eps.len())));
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("eps values must be strictly decreasing".into()));
        }
        let eps_max = built.model.eps_max();
        if let Some(e) = self.eps.iter().find(|&&e| !(e > 0.0 && e <= eps_max)) {
            return Err(Error::Config(format!("eps = {e} outside (0, {eps_max}]")));
        }
        TimePlan::new(self.t_end, self.cfl, self.scheme)?;
        Ok(())
    }
}

/// Source of the limit solution used as reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitSource {
    Exact,
    /// Numerical target solution on a grid refined by the given factor.
    Reference { factor: usize },
}

/// Outcome of one `eps` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eps: f64,
    /// Error of the `u` components at `t_end`; `None` if the run failed.
    pub error: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    pub cells: Vec<usize>,
    pub conservation_defect: f64,
    pub wall_ms: Option<u64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub model_id: String,
    pub limit: LimitSource,
    pub points: Vec<SweepPoint>,
    /// Fit over every successful point; `None` with fewer than 3.
    pub fit: Option<Fit>,
    /// Errors strictly decrease with `eps`.
    pub monotone: bool,
    pub diverged: bool,
}

impl SweepResult {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn slope_in_window(&self) -> bool {
        self.slope().is_some_and(|s| s >= SLOPE_WINDOW.0 && s <= SLOPE_WINDOW.1)
    }

    /// All runs finished and the fitted slope lies in [`SLOPE_WINDOW`].
    pub fn passed(&self) -> bool {
        !self.diverged && self.slope_in_window()
    }

    pub fn errors(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.error).collect()
    }

    pub fn max_conservation_defect(&self) -> f64 {
        self.points.iter().map(|p| p.conservation_defect).fold(0.0, f64::max)
    }
}

/// Limit solution at `t_end` on `grid`.
fn limit_field(built: &BuiltModel, grid: &Grid, t_end: f64) -> Result<(GridField, LimitSource)> {
    let m = built.model.dims().m();
    if let Some(exact) = built.target.exact_solution() {
        return Ok((sample_solution(grid, m, exact, t_end)?, LimitSource::Exact));
    }
    let fine = grid.refine(REFERENCE_FACTOR)?;
    let init = sample_solution(&fine, m, &built.initial, 0.0)?;
    let out = solve_target_reference(&built.target, &init, t_end)?;
    let values = (0..grid.len())
        .flat_map(|c| out.cell(grid.refined_index(c, REFERENCE_FACTOR)).to_vec())
        .collect();
    Ok((
        GridField::new(grid.clone(), m, values)?,
        LimitSource::Reference {
            factor: REFERENCE_FACTOR,
        },
    ))
}

/// Norm of the `u` components of `relax` minus `limit`.
fn u_error(relax: &GridField, limit: &GridField, norm: Norm) -> f64 {
    let m = limit.width();
    let grid = limit.grid();
    let diffs = (0..grid.len()).flat_map(|c| {
        let a = &relax.cell(c)[..m];
        let b = limit.cell(c);
        a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()
    });
    match norm {
        Norm::Linf => diffs.fold(0.0, |acc, v: f64| acc.max(v.abs())),
        Norm::L2 => {
            let vol: f64 = (0..grid.d()).map(|k| grid.spacing(k)).product();
            (diffs.map(|v| v * v).sum::<f64>() * vol).sqrt()
        }
    }
}

fn run_point(built: &BuiltModel, cfg: &SweepConfig, grid: &Grid, limit: &GridField, eps: f64) -> SweepPoint {
    let plan = TimePlan {
        t_end: cfg.t_end,
        cfl: cfg.cfl,
        scheme: cfg.scheme,
    };
    let start = Instant::now();
    let outcome = relax_initial(built.model.as_ref(), grid, |x| (built.initial)(x, 0.0), eps, cfg.winit)
        .and_then(|init| solve_relax(built.model.as_ref(), &init, eps, &plan));
    let wall_ms = cfg.timing.then(|| start.elapsed().as_millis() as u64);
    match outcome {
        Ok(run) => SweepPoint {
            eps,
            error: Some(u_error(&run.field, limit, cfg.norm)),
            dt: run.dt,
            steps: run.steps,
            cells: grid.cells().to_vec(),
            conservation_defect: run.conservation_defect,
            wall_ms,
            failure: None,
        },
        Err(e) => SweepPoint {
            eps,
            error: None,
            dt: f64::NAN,
            steps: 0,
            cells: grid.cells().to_vec(),
            conservation_defect: 0.0,
            wall_ms,
            failure: Some(e.to_string()),
        },
    }
}

fn sweep_on(built: &BuiltModel, cfg: &SweepConfig, cells: usize) -> Result<SweepResult> {
    cfg.validate(built)?;
    let grid = Grid::periodic(built.model.dims().d(), cells)?;
    let (limit, source) = limit_field(built, &grid, cfg.t_end)?;
    let points: Vec<SweepPoint> = cfg
        .eps
        .par_iter()
        .map(|&eps| run_point(built, cfg, &grid, &limit, eps))
        .collect();
    let diverged = points.iter().any(|p| p.error.is_none());
    let ok: Vec<(f64, f64)> = points.iter().filter_map(|p| p.error.map(|e| (p.eps, e))).collect();
    let fit = if ok.len() >= 3 { fit_order(&ok).ok() } else { None };
    let monotone = !diverged && ok.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(SweepResult {
        config: cfg.clone(),
        model_id: built.id(),
        limit: source,
        points,
        fit,
        monotone,
        diverged,
    })
}

/// Runs every `eps` (in parallel), measures the `u` error at `t_end` against
/// the exact limit solution when the target has one and against a
/// [`REFERENCE_FACTOR`]-times finer reference solution otherwise, and fits
/// the order over all successful runs.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let built = cfg.build()?;
    let cells = cfg.cells_for(built.model.dims().d());
    sweep_on(&built, cfg, cells)
}

/// Error at one `eps` on the configured grid and on the grid with half the spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub eps: f64,
    pub coarse: f64,
    pub fine: f64,
    /// `|fine - coarse| / fine`.
    pub relative_change: f64,
}

impl GridCheck {
    pub fn passed(&self) -> bool {
        self.relative_change < GRID_CHANGE_LIMIT
    }
}

/// Reruns `eps` with halved spacing to confirm that the spatial error is
/// small against the `eps` error.
pub fn grid_halving_check(cfg: &SweepConfig, eps: f64) -> Result<GridCheck> {
    let built = cfg.build()?;
    let d = built.model.dims().d();
    let cells = cfg.cells_for(d);
    let mut single = cfg.clone();
    // the sweep validator wants three values; only the first is used
    single.eps = vec![eps, eps / 2.0, eps / 4.0];
    single.validate(&built)?;
    let mut errs = [0.0; 2];
    for (slot, c) in errs.iter_mut().zip([cells, 2 * cells]) {
        let grid = Grid::periodic(d, c)?;
        let (limit, _) = limit_field(&built, &grid, cfg.t_end)?;
        let p = run_point(&built, &single, &grid, &limit, eps);
        *slot = p.error.ok_or_else(|| Error::Divergence {
            t: f64::NAN,
            reason: p.failure.unwrap_or_default(),
        })?;
    }
    Ok(GridCheck {
        eps,
        coarse: errs[0],
        fine: errs[1],
        relative_change: (errs[1] - errs[0]).abs() / errs[1].max(f64::MIN_POSITIVE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let built = build_model("cde1d:linear-heat", ModelOptions::default()).unwrap();
        let mut cfg = SweepConfig::new("cde1d:linear-heat");
        assert!(cfg.validate(&built).is_ok());
        cfg.eps = vec![0.1, 0.05];
        assert!(cfg.validate(&built).is_err());
        cfg.eps = vec![0.1, 0.1, 0.05];
        assert!(cfg.validate(&built).is_err());
        cfg.eps = vec![2.0, 0.1, 0.05];
        assert!(cfg.validate(&built).is_err());
    }

    #[test]
    fn linear_heat_sweep_is_deterministic() {
        let mut cfg = SweepConfig::new("cde1d:linear-heat");
        cfg.cells = Some(32);
        cfg.eps = vec![0.2, 0.1, 0.05];
        cfg.t_end = 0.05;
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.limit, LimitSource::Exact);
        assert!(!a.diverged);
        assert!(a.max_conservation_defect() < 1e-12);
    }

    #[test]
    fn reference_limit_for_models_without_exact_solution() {
        let mut cfg = SweepConfig::new("cde1d:burgers");
        cfg.cells = Some(16);
        cfg.eps = vec![0.2, 0.1, 0.05];
        cfg.t_end = 0.02;
        let r = run_sweep(&cfg).unwrap();
        assert_eq!(r.limit, LimitSource::Reference { factor: REFERENCE_FACTOR });
        assert!(r.points.iter().all(|p| p.error.unwrap() > 0.0));
    }

    #[test]
    fn norms_parse() {
        assert_eq!("l2".parse::<Norm>().unwrap(), Norm::L2);
        assert!("l1".parse::<Norm>().is_err());
    }
}
