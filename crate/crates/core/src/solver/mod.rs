//! Finite-volume integration of relaxation systems and reference solutions
//! of their targets.

mod exact;
mod grid;
mod reference;
mod relax;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exact::ExactSolution;
pub use grid::{Grid, GridField, MIN_CELLS};
pub use reference::{sample_solution, solve_target_reference};
pub use relax::{relax_initial, solve_relax, stable_dt, step_relax, stiffness, RelaxRun, WInit, DIVERGENCE_FACTOR};

/// Time-integration scheme for the relaxation system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Forward/backward Euler with first-order local Lax-Friedrichs fluxes.
    Imex1,
    /// ARS(2,2,2) with linearly reconstructed face states.
    #[default]
    Imex2,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imex1" => Ok(Self::Imex1),
            "imex2" => Ok(Self::Imex2),
            other => Err(Error::Config(format!("unknown scheme `{other}` (expected imex1 or imex2)"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Imex1 => "imex1",
            Self::Imex2 => "imex2",
        })
    }
}

/// Final time, CFL number and scheme of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePlan {
    pub t_end: f64,
    pub cfl: f64,
    pub scheme: Scheme,
}

impl TimePlan {
    pub fn new(t_end: f64, cfl: f64, scheme: Scheme) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {t_end}")));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        Ok(Self { t_end, cfl, scheme })
    }
}
