//! Finite-difference Jacobians of model callbacks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_inputs, finite_matrix, finite_vector, RelaxModel, StateVec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdScheme {
    Central,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianConfig {
    /// Relative step; entry `i` uses `step_scale * max(1, |U_i|)`.
    pub step_scale: f64,
    pub scheme: FdScheme,
}

impl Default for JacobianConfig {
    fn default() -> Self {
        Self {
            step_scale: f64::EPSILON.cbrt(),
            scheme: FdScheme::Central,
        }
    }
}

impl JacobianConfig {
    pub fn new(step_scale: f64, scheme: FdScheme) -> Result<Self> {
        if !(step_scale > 0.0) || !step_scale.is_finite() {
            return Err(Error::Config(format!("step_scale must be positive, got {step_scale}")));
        }
        Ok(Self { step_scale, scheme })
    }

    pub(crate) fn step(&self, x: f64) -> f64 {
        self.step_scale * x.abs().max(1.0)
    }
}

/// Blocks of an `n x n` matrix under the `(m, r)` partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    B11,
    B12,
    B21,
    B22,
}

impl Block {
    fn ranges(self, m: usize, r: usize) -> ((usize, usize), (usize, usize)) {
        match self {
            Block::B11 => ((0, m), (0, m)),
            Block::B12 => ((0, m), (m, r)),
            Block::B21 => ((m, r), (0, m)),
            Block::B22 => ((m, r), (m, r)),
        }
    }

    pub fn extract(self, a: &DMatrix<f64>, m: usize, r: usize) -> DMatrix<f64> {
        let ((r0, nr), (c0, nc)) = self.ranges(m, r);
        a.view((r0, c0), (nr, nc)).into_owned()
    }
}

/// Variable a block derivative is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wrt {
    U,
    W,
    Eps,
}

/// `d Q / d U` at `(U, eps)`.
pub fn jac_source_wrt_state(
    model: &dyn RelaxModel,
    state: &StateVec,
    eps: f64,
    cfg: &JacobianConfig,
) -> Result<DMatrix<f64>> {
    check_inputs(model, state, eps)?;
    let n = model.dims().n();
    let base = finite_vector(model.source(state, eps), "source")?;
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        let h = cfg.step(state.entries()[i]);
        let plus = finite_vector(model.source(&state.shifted(i, h), eps), "source")?;
        let col = match cfg.scheme {
            FdScheme::Central => {
                let minus = finite_vector(model.source(&state.shifted(i, -h), eps), "source")?;
                (plus - minus) / (2.0 * h)
            }
            FdScheme::Forward => (plus - &base) / h,
        };
        jac.set_column(i, &col);
    }
    Ok(jac)
}

/// `d Q / d eps` at `eps = 0`, by a one-sided difference since `eps < 0` is
/// outside the model's domain.
pub fn jac_source_wrt_eps(
    model: &dyn RelaxModel,
    state: &StateVec,
    cfg: &JacobianConfig,
) -> Result<DVector<f64>> {
    check_inputs(model, state, 0.0)?;
    let h = cfg.step_scale;
    let q0 = finite_vector(model.source(state, 0.0), "source")?;
    let qh = finite_vector(model.source(state, h), "source")?;
    Ok((qh - q0) / h)
}

/// Block of `A_j(U; eps)`.
pub fn flux_block(
    model: &dyn RelaxModel,
    state: &StateVec,
    eps: f64,
    dir: usize,
    block: Block,
) -> Result<DMatrix<f64>> {
    check_inputs(model, state, eps)?;
    check_dir(model, dir)?;
    let dims = model.dims();
    let a = finite_matrix(model.flux_matrix(state, eps, dir), "flux matrix")?;
    Ok(block.extract(&a, dims.m(), dims.r()))
}

/// Derivative of a block of `A_j` with respect to each component of `u`, each
/// component of `w`, or `eps`. Returns one matrix per differentiation variable.
pub fn jac_flux_block(
    model: &dyn RelaxModel,
    state: &StateVec,
    eps: f64,
    dir: usize,
    block: Block,
    wrt: Wrt,
    cfg: &JacobianConfig,
) -> Result<Vec<DMatrix<f64>>> {
    check_inputs(model, state, eps)?;
    check_dir(model, dir)?;
    let dims = model.dims();
    let (m, r) = (dims.m(), dims.r());
    let eval = |s: &StateVec, e: f64| -> Result<DMatrix<f64>> {
        let a = finite_matrix(model.flux_matrix(s, e, dir), "flux matrix")?;
        Ok(block.extract(&a, m, r))
    };
    match wrt {
        Wrt::Eps => {
            let h = cfg.step_scale;
            let d = if cfg.scheme == FdScheme::Central && eps >= h {
                (eval(state, eps + h)? - eval(state, eps - h)?) / (2.0 * h)
            } else {
                (eval(state, eps + h)? - eval(state, eps)?) / h
            };
            Ok(vec![d])
        }
        Wrt::U | Wrt::W => {
            let range = if wrt == Wrt::U { 0..m } else { m..m + r };
            let base = eval(state, eps)?;
            range
                .map(|i| {
                    let h = cfg.step(state.entries()[i]);
                    let plus = eval(&state.shifted(i, h), eps)?;
                    Ok(match cfg.scheme {
                        FdScheme::Central => (plus - eval(&state.shifted(i, -h), eps)?) / (2.0 * h),
                        FdScheme::Forward => (plus - &base) / h,
                    })
                })
                .collect()
        }
    }
}

fn check_dir(model: &dyn RelaxModel, dir: usize) -> Result<()> {
    if dir >= model.dims().d() {
        return Err(Error::Config(format!(
            "direction {dir} out of range for a {}-dimensional model",
            model.dims().d()
        )));
    }
    Ok(())
}
