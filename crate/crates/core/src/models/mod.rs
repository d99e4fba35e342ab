//! The builtin relaxation models and the name-based registry.
//!
//! Each builder returns the model together with the target system it is meant
//! to approximate. Presets are addressed as `"<name>:<preset>"`; a bare name
//! selects the model's default preset.

mod cde1d;
mod general_hp;
mod kinetic;
mod lbe;
mod nldiff;
mod viscous;

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{RelaxModel, SolutionFn, TargetPde};

pub use cde1d::{build_cde1d, Cde1d, Cde1dSpec, SUBCHARACTERISTIC_SAFETY};
pub use general_hp::{assemble_general_hp, build_general_hp, GeneralHp, GeneralHpSpec};
pub(crate) use general_hp::check_assumptions;
pub use kinetic::{build_kinetic_bgk, KineticBgk, KineticBgkSpec};
pub use lbe::{
    build_lbe_d2q5, equilibrium as lbe_equilibrium, flux_matrix_constant as lbe_flux_matrix,
    symmetrizer_constant as lbe_symmetrizer, transformation_matrix as lbe_transformation_matrix,
    Flux2Fn, LbeD2q5, LbeD2q5Spec, TAU_PER_DIFFUSION, VELOCITIES as LBE_VELOCITIES,
    WEIGHTS as LBE_WEIGHTS,
};
pub use nldiff::{build_nldiff, NlDiff, NlDiffSpec};
pub use viscous::{build_viscous_cons, ViscousCons, ViscousConsSpec};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// `u -> f_j(u)` for direction `j`.
pub type VecFnDir = Arc<dyn Fn(&DVector<f64>, usize) -> DVector<f64> + Send + Sync>;
/// `u -> matrix` for direction `j`.
pub type JacFn = Arc<dyn Fn(&DVector<f64>, usize) -> DMatrix<f64> + Send + Sync>;
/// `u -> matrix` for the direction pair `(j, k)`.
pub type PairMatFn = Arc<dyn Fn(&DVector<f64>, usize, usize) -> DMatrix<f64> + Send + Sync>;
pub type MatFnU = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type VecFnU = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Number of sampled states used by the construction-time assumption checks.
pub const CONSTRUCTION_SAMPLES: usize = 32;
/// Fixed seed for construction-time sampling, so model building is deterministic.
pub const CONSTRUCTION_SEED: u64 = 0x5eed_0001;

pub const MODEL_NAMES: [&str; 6] = [
    "cde1d",
    "viscous-cons",
    "nldiff",
    "lbe-d2q5",
    "kinetic-bgk",
    "general-hp",
];

pub(crate) fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, len: usize, range: (f64, f64)) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| rng.random_range(range.0..=range.1)))
}

/// Options that modify a preset at build time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelOptions {
    /// Multiplier on the LBE relaxation time (`lbe-d2q5` only).
    pub tau_scale: Option<f64>,
}

/// A registry model together with its target and a smooth initial profile
/// that stays inside the model's state box.
#[derive(Clone)]
pub struct BuiltModel {
    pub name: String,
    pub preset: String,
    pub model: Arc<dyn RelaxModel>,
    pub target: TargetPde,
    /// `x -> u_0(x)` on the periodic cell `[0, 2 pi)^d`.
    pub initial: SolutionFn,
}

impl std::fmt::Debug for BuiltModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuiltModel")
            .field("name", &self.name)
            .field("preset", &self.preset)
            .field("dims", &self.model.dims())
            .finish()
    }
}

impl BuiltModel {
    /// `"<name>:<preset>"`.
    pub fn id(&self) -> String {
        format!("{}:{}", self.name, self.preset)
    }
}

/// Presets per model; the first entry is the default.
pub fn presets(name: &str) -> Result<&'static [&'static str]> {
    Ok(match name {
        "cde1d" => &["burgers", "linear-heat"],
        "viscous-cons" => &["scalar", "2d"],
        "nldiff" => &["cubic", "linear", "cubic-2d"],
        "lbe-d2q5" => &["linear", "nonlinear"],
        "kinetic-bgk" => &["scalar"],
        "general-hp" => &["trivial", "generated"],
        other => return Err(Error::UnknownModel(other.to_string())),
    })
}

/// The preset instances certified by the acceptance checks.
pub fn default_builtins() -> Vec<&'static str> {
    vec![
        "cde1d:burgers",
        "viscous-cons:scalar",
        "viscous-cons:2d",
        "nldiff:cubic",
        "nldiff:cubic-2d",
        "lbe-d2q5:linear",
        "kinetic-bgk:scalar",
        "general-hp:trivial",
    ]
}

/// Every registered `"<name>:<preset>"` identifier.
pub fn all_presets() -> Vec<String> {
    MODEL_NAMES
        .iter()
        .flat_map(|n| presets(n).unwrap().iter().map(move |p| format!("{n}:{p}")))
        .collect()
}

fn wave_1d(mean: f64, amp: f64) -> SolutionFn {
    Arc::new(move |x: &[f64], _| DVector::from_element(1, mean + amp * x[0].sin()))
}

fn wave_2d(mean: f64, amp: f64) -> SolutionFn {
    Arc::new(move |x: &[f64], _| DVector::from_element(1, mean + amp * (x[0].sin() + (x[1]).cos())))
}

/// Builds a model from `"<name>"` or `"<name>:<preset>"`.
pub fn build_model(id: &str, opts: ModelOptions) -> Result<BuiltModel> {
    let (name, preset) = match id.split_once(':') {
        Some((n, p)) => (n, p),
        None => (id, presets(id)?[0]),
    };
    let known = presets(name)?;
    if !known.contains(&preset) {
        return Err(Error::UnknownModel(format!("{name}:{preset}")));
    }
    if opts.tau_scale.is_some() && name != "lbe-d2q5" {
        return Err(Error::Config(format!("tau_scale does not apply to model `{name}`")));
    }
    let (model, target, initial): (Arc<dyn RelaxModel>, TargetPde, SolutionFn) = match (name, preset) {
        ("cde1d", "burgers") => {
            let (m, t) = build_cde1d(Cde1dSpec::burgers())?;
            (Arc::new(m), t, wave_1d(1.0, 0.5))
        }
        ("cde1d", "linear-heat") => {
            let (m, t) = build_cde1d(Cde1dSpec::linear_heat())?;
            let t = t.with_exact_solution(crate::solver::ExactSolution::HeatSine { mean: 1.5, amp: 0.5, diffusion: 1.0 }.callback());
            (Arc::new(m), t, wave_1d(1.5, 0.5))
        }
        ("viscous-cons", "scalar") => {
            let (m, t) = build_viscous_cons(ViscousConsSpec::scalar_burgers(0.5))?;
            (Arc::new(m), t, wave_1d(1.0, 0.5))
        }
        ("viscous-cons", "2d") => {
            let (m, t) = build_viscous_cons(ViscousConsSpec::coupled_2d())?;
            let init: SolutionFn = Arc::new(|x: &[f64], _| {
                DVector::from_column_slice(&[1.0 + 0.3 * x[0].sin(), 1.0 + 0.3 * x[1].cos()])
            });
            (Arc::new(m), t, init)
        }
        ("nldiff", "cubic") => {
            let (m, t) = build_nldiff(NlDiffSpec::cubic(1))?;
            (Arc::new(m), t, wave_1d(1.0, 0.3))
        }
        ("nldiff", "linear") => {
            let (m, t) = build_nldiff(NlDiffSpec::linear(1))?;
            let t = t.with_exact_solution(crate::solver::ExactSolution::HeatSine { mean: 1.0, amp: 0.5, diffusion: 1.0 }.callback());
            (Arc::new(m), t, wave_1d(1.0, 0.5))
        }
        ("nldiff", "cubic-2d") => {
            let (m, t) = build_nldiff(NlDiffSpec::cubic(2))?;
            (Arc::new(m), t, wave_2d(1.0, 0.15))
        }
        ("lbe-d2q5", preset) => {
            let mut spec = if preset == "linear" {
                LbeD2q5Spec::linear(0.5, 0.25, 0.2)
            } else {
                LbeD2q5Spec::nonlinear()
            };
            if let Some(s) = opts.tau_scale {
                spec.tau_scale = s;
            }
            let (m, mut t) = build_lbe_d2q5(spec)?;
            if preset == "linear" {
                t = t.with_exact_solution(crate::solver::ExactSolution::AdvDiff2d {
                    mean: 1.0,
                    amp: 0.25,
                    velocity: [0.5, 0.25],
                    diffusion: 0.2,
                }
                .callback());
            }
            (Arc::new(m), t, wave_2d(1.0, 0.25))
        }
        ("kinetic-bgk", _) => {
            let (m, t) = build_kinetic_bgk(KineticBgkSpec::scalar_default())?;
            (Arc::new(m), t, wave_1d(1.0, 0.5))
        }
        ("general-hp", "trivial") => {
            let (m, t) = build_general_hp(GeneralHpSpec::trivial())?;
            (Arc::new(m), t, wave_1d(1.0, 0.5))
        }
        ("general-hp", _) => {
            let spec = crate::criteria::gen_theorem4_instance(crate::criteria::DEFAULT_SEED, 2, 1, 1)?;
            let (m, t) = build_general_hp(spec)?;
            let init: SolutionFn = Arc::new(|x: &[f64], _| {
                DVector::from_column_slice(&[1.0 + 0.3 * x[0].sin(), 1.0 + 0.3 * x[0].cos()])
            });
            (Arc::new(m), t, init)
        }
        _ => unreachable!("preset list checked above"),
    };
    Ok(BuiltModel {
        name: name.to_string(),
        preset: preset.to_string(),
        model,
        target,
        initial,
    })
}

/// `sigma` for `N' = 2` velocities in one space dimension.
pub(crate) const SIGMA_1D: [f64; 2] = [FRAC_1_SQRT_2, -FRAC_1_SQRT_2];
