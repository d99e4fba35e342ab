//! Closed-form solutions of constant-coefficient target problems.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SolutionFn;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExactSolution {
    /// `mean + amp e^{-D t} sin x` for `u_t = D u_xx`.
    HeatSine { mean: f64, amp: f64, diffusion: f64 },
    /// `mean + amp e^{-D k^2 t} sin(k (x - c t))` for `u_t + c u_x = D u_xx`.
    AdvDiff1d {
        mean: f64,
        amp: f64,
        velocity: f64,
        diffusion: f64,
        wavenumber: f64,
    },
    /// `mean + amp e^{-D t} [sin(x - c_x t) + cos(y - c_y t)]` for
    /// `u_t + c . grad u = D lap u`.
    AdvDiff2d {
        mean: f64,
        amp: f64,
        velocity: [f64; 2],
        diffusion: f64,
    },
    /// `mean + amp e^{-2 D t} sin x sin y` for `u_t = D lap u`.
    Heat2dProduct { mean: f64, amp: f64, diffusion: f64 },
}

impl ExactSolution {
    pub const NAMES: [&'static str; 4] = ["heat-sine", "adv-diff-1d", "adv-diff-2d", "heat-2d-product"];

    /// Library entry with its default parameters.
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "heat-sine" => Self::HeatSine {
                mean: 1.5,
                amp: 0.5,
                diffusion: 1.0,
            },
            "adv-diff-1d" => Self::AdvDiff1d {
                mean: 1.0,
                amp: 0.5,
                velocity: 1.0,
                diffusion: 0.5,
                wavenumber: 1.0,
            },
            "adv-diff-2d" => Self::AdvDiff2d {
                mean: 1.0,
                amp: 0.25,
                velocity: [0.5, 0.25],
                diffusion: 0.2,
            },
            "heat-2d-product" => Self::Heat2dProduct {
                mean: 1.0,
                amp: 0.5,
                diffusion: 1.0,
            },
            other => return Err(Error::UnknownSolution(other.to_string())),
        })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::HeatSine { .. } | Self::AdvDiff1d { .. } => 1,
            Self::AdvDiff2d { .. } | Self::Heat2dProduct { .. } => 2,
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match *self {
            Self::HeatSine { mean, amp, diffusion } => mean + amp * (-diffusion * t).exp() * x[0].sin(),
            Self::AdvDiff1d {
                mean,
                amp,
                velocity,
                diffusion,
                wavenumber: k,
            } => mean + amp * (-diffusion * k * k * t).exp() * (k * (x[0] - velocity * t)).sin(),
            Self::AdvDiff2d {
                mean,
                amp,
                velocity,
                diffusion,
            } => {
                mean + amp
                    * (-diffusion * t).exp()
                    * ((x[0] - velocity[0] * t).sin() + (x[1] - velocity[1] * t).cos())
            }
            Self::Heat2dProduct { mean, amp, diffusion } => {
                mean + amp * (-2.0 * diffusion * t).exp() * x[0].sin() * x[1].sin()
            }
        }
    }

    pub fn callback(self) -> SolutionFn {
        Arc::new(move |x: &[f64], t| DVector::from_element(1, self.eval(x, t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Residual of `u_t + c . grad u - D lap u` by central differences.
    fn residual(sol: &ExactSolution, c: &[f64], dcoef: f64, x: &[f64], t: f64) -> f64 {
        let h = 1e-4;
        let ut = (sol.eval(x, t + h) - sol.eval(x, t - h)) / (2.0 * h);
        let mut r = ut;
        for j in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (p, m, z) = (sol.eval(&xp, t), sol.eval(&xm, t), sol.eval(x, t));
            r += c[j] * (p - m) / (2.0 * h) - dcoef * (p - 2.0 * z + m) / (h * h);
        }
        r
    }

    #[test]
    fn library_entries_solve_their_equations() {
        let cases: [(&str, Vec<f64>, f64); 4] = [
            ("heat-sine", vec![0.0], 1.0),
            ("adv-diff-1d", vec![1.0], 0.5),
            ("adv-diff-2d", vec![0.5, 0.25], 0.2),
            ("heat-2d-product", vec![0.0, 0.0], 1.0),
        ];
        for (name, c, dcoef) in cases {
            let sol = ExactSolution::by_name(name).unwrap();
            let x: Vec<f64> = (0..sol.dimension()).map(|k| 0.3 + 0.7 * k as f64).collect();
            let r = residual(&sol, &c, dcoef, &x, 0.2);
            assert!(r.abs() < 1e-5, "{name}: {r}");
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(ExactSolution::by_name("nope"), Err(Error::UnknownSolution(_))));
    }
}
