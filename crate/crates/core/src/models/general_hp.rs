//! Relaxation model for a general symmetrizable hyperbolic-parabolic system
//!
//! ```text
//! u_t + sum_j a_j(u) u_{x_j} = sum_{j,k} (D_jk(u) u_{x_k})_{x_j},
//! D_jk = [[0, 0], [D_jk^21, D_jk^22]],
//! ```
//!
//! with `u = (u_1, u_2)`, `u_2 in R^s`. Only the diffusive fluxes of the
//! `u_2` equations are relaxed, one `w_j in R^s` per direction, so the state is
//! `U = (u_1, u_2, w_1, ..., w_d)` and `A_j(U; eps) = eps A-bar_j + A-hat_j`.
//! The symmetrizer is `diag{a_0, B}` with `B = diag{a_0^22, ...} H^{-1}` and
//! `H = [D_jk^22]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{sample_uniform, JacFn, MatFnU, PairMatFn, CONSTRUCTION_SAMPLES, CONSTRUCTION_SEED};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{AffineRelaxation, ModelDims, RelaxModel, StateBox, StateVec, TargetPde};

/// Relative tolerance for the sampled assumption checks.
const ASSUMPTION_TOLERANCE: f64 = 1e-10;

#[derive(Clone)]
pub struct GeneralHpSpec {
    pub m: usize,
    pub s: usize,
    pub d: usize,
    /// `a_j(u)`, `m x m`.
    pub advection: JacFn,
    /// `D_jk^21(u)`, `s x (m - s)`.
    pub d21: PairMatFn,
    /// `D_jk^22(u)`, `s x s`.
    pub d22: PairMatFn,
    /// Symmetrizer `a_0(u)` of the target system.
    pub a0: MatFnU,
    pub u_range: (f64, f64),
    pub w_range: (f64, f64),
}

impl GeneralHpSpec {
    /// `m = s = d = 1`, `a_0 = 1`, `a_1 = 0`, `D_11 = 1`: the heat equation.
    pub fn trivial() -> Self {
        Self {
            m: 1,
            s: 1,
            d: 1,
            advection: Arc::new(|_, _| DMatrix::zeros(1, 1)),
            d21: Arc::new(|_, _, _| DMatrix::zeros(1, 0)),
            d22: Arc::new(|_, _, _| DMatrix::identity(1, 1)),
            a0: Arc::new(|_| DMatrix::identity(1, 1)),
            u_range: (0.1, 2.0),
            w_range: (-0.5, 0.5),
        }
    }

    /// Full `m x m` diffusion block `D_jk(u)` (zero top rows).
    pub fn diffusion(&self, u: &DVector<f64>, j: usize, k: usize) -> DMatrix<f64> {
        full_diffusion(self.m, self.s, &(self.d21)(u, j, k), &(self.d22)(u, j, k))
    }

    /// `H = [D_jk^22]`, `sd x sd`.
    pub fn h_matrix(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let (s, d) = (self.s, self.d);
        let mut h = DMatrix::zeros(s * d, s * d);
        for j in 0..d {
            for k in 0..d {
                h.view_mut((j * s, k * s), (s, s)).copy_from(&(self.d22)(u, j, k));
            }
        }
        h
    }

    /// `[D_jk^21]`, `sd x (m - s) d`.
    pub fn d21_matrix(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let (m1, s, d) = (self.m - self.s, self.s, self.d);
        let mut out = DMatrix::zeros(s * d, m1 * d);
        for j in 0..d {
            for k in 0..d {
                out.view_mut((j * s, k * m1), (s, m1)).copy_from(&(self.d21)(u, j, k));
            }
        }
        out
    }

    /// The `md x md` matrix `[a_0 D_jk]`.
    pub fn weighted_diffusion(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let (m, d) = (self.m, self.d);
        let a0 = (self.a0)(u);
        let mut out = DMatrix::zeros(m * d, m * d);
        for j in 0..d {
            for k in 0..d {
                out.view_mut((j * m, k * m), (m, m)).copy_from(&(&a0 * self.diffusion(u, j, k)));
            }
        }
        out
    }

    /// `B = diag{a_0^22, ...} H^{-1}`; NaN when `H` is numerically singular.
    pub fn b_matrix(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let (m1, s) = (self.m - self.s, self.s);
        let a0 = (self.a0)(u);
        let a22 = a0.view((m1, m1), (s, s)).into_owned();
        linalg::block_diag(&vec![a22; self.d]) * linalg::inverse_or_nan(&self.h_matrix(u))
    }
}

fn full_diffusion(m: usize, s: usize, d21: &DMatrix<f64>, d22: &DMatrix<f64>) -> DMatrix<f64> {
    let m1 = m - s;
    let mut out = DMatrix::zeros(m, m);
    out.view_mut((m1, 0), (s, m1)).copy_from(d21);
    out.view_mut((m1, m1), (s, s)).copy_from(d22);
    out
}

pub struct GeneralHp {
    spec: GeneralHpSpec,
    dims: ModelDims,
    state_box: StateBox,
    /// `a_j(u)` is the same at every sampled state, so the `u` rows are in
    /// divergence form.
    constant_advection: bool,
}

impl GeneralHp {
    pub fn spec(&self) -> &GeneralHpSpec {
        &self.spec
    }

    /// `A-bar_j`: the target advection in the top-left block.
    pub fn slow_flux(&self, u: &DVector<f64>, dir: usize) -> DMatrix<f64> {
        let (m, n) = (self.spec.m, self.dims.n());
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (m, m)).copy_from(&(self.spec.advection)(u, dir));
        a
    }

    /// `A-hat_j`: the relaxed diffusive coupling.
    pub fn fast_flux(&self, u: &DVector<f64>, dir: usize) -> DMatrix<f64> {
        let (m, s, d, n) = (self.spec.m, self.spec.s, self.spec.d, self.dims.n());
        let m1 = m - s;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..s {
            a[(m1 + i, m + dir * s + i)] = 1.0;
        }
        for row in 0..d {
            let blk = full_diffusion(m, s, &(self.spec.d21)(u, row, dir), &(self.spec.d22)(u, row, dir));
            a.view_mut((m + row * s, 0), (s, m)).copy_from(&blk.rows(m1, s));
        }
        a
    }
}

fn validate_shapes(spec: &GeneralHpSpec) -> Result<()> {
    if spec.s == 0 || spec.s > spec.m {
        return Err(Error::Construction(format!(
            "general-hp: need 1 <= s <= m, got s = {}, m = {}",
            spec.s, spec.m
        )));
    }
    Ok(())
}

/// Assembles the model without checking assumptions (I)-(III). Used to build
/// deliberately broken instances; [`build_general_hp`] is the checked entry point.
pub fn assemble_general_hp(spec: GeneralHpSpec) -> Result<(GeneralHp, TargetPde)> {
    validate_shapes(&spec)?;
    let (m, s, d) = (spec.m, spec.s, spec.d);
    let dims = ModelDims::new(m + s * d, s * d, d)?;
    let state_box = StateBox::uniform(dims, spec.u_range, spec.w_range)?;
    let advection = spec.advection.clone();
    let diff_spec = spec.clone();
    let target = TargetPde::new(
        m,
        d,
        Arc::new(move |u, j| advection(u, j)),
        Arc::new(move |u, j, k| diff_spec.diffusion(u, j, k)),
    );
    let constant_advection = has_constant_advection(&spec);
    Ok((
        GeneralHp {
            spec,
            dims,
            state_box,
            constant_advection,
        },
        target,
    ))
}

fn has_constant_advection(spec: &GeneralHpSpec) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(CONSTRUCTION_SEED);
    let base = DVector::from_element(spec.m, spec.u_range.0);
    (0..CONSTRUCTION_SAMPLES).all(|_| {
        let u = sample_uniform(&mut rng, spec.m, spec.u_range);
        (0..spec.d).all(|j| (spec.advection)(&u, j) == (spec.advection)(&base, j))
    })
}

/// Builds the model after checking on sampled states that `a_0` is SPD, that
/// `a_0 a_j` is symmetric (I), that `[a_0 D_jk]` is symmetric positive
/// semidefinite (II) and that `H` is invertible (III).
pub fn build_general_hp(spec: GeneralHpSpec) -> Result<(GeneralHp, TargetPde)> {
    validate_shapes(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(CONSTRUCTION_SEED);
    for _ in 0..CONSTRUCTION_SAMPLES {
        let u = sample_uniform(&mut rng, spec.m, spec.u_range);
        check_assumptions(&spec, &u).map_err(|msg| Error::Construction(format!("general-hp: {msg}")))?;
    }
    assemble_general_hp(spec)
}

/// Checks (I)-(III) and positivity of `a_0` at one state.
pub(crate) fn check_assumptions(spec: &GeneralHpSpec, u: &DVector<f64>) -> std::result::Result<(), String> {
    let a0 = (spec.a0)(u);
    let a0_scale = linalg::max_abs(&a0);
    if linalg::symmetry_defect(&a0) > ASSUMPTION_TOLERANCE * a0_scale {
        return Err("a_0 is not symmetric".into());
    }
    let ev = linalg::sym_eigenvalues(&a0);
    if !(ev[0] > ASSUMPTION_TOLERANCE * ev[ev.len() - 1]) {
        return Err(format!("a_0 is not positive definite (min eigenvalue {:e})", ev[0]));
    }
    for j in 0..spec.d {
        let prod = &a0 * (spec.advection)(u, j);
        if linalg::symmetry_defect(&prod) > ASSUMPTION_TOLERANCE * linalg::max_abs(&prod).max(1.0) {
            return Err(format!("(I) a_0 a_{} is not symmetric", j + 1));
        }
    }
    let big = spec.weighted_diffusion(u);
    let scale = linalg::max_abs(&big).max(f64::MIN_POSITIVE);
    if linalg::symmetry_defect(&big) > ASSUMPTION_TOLERANCE * scale {
        return Err("(II) [a_0 D_jk] is not symmetric".into());
    }
    let ev = linalg::sym_eigenvalues(&big);
    if ev[0] < -ASSUMPTION_TOLERANCE * scale {
        return Err(format!("(II) [a_0 D_jk] is not positive semidefinite (eigenvalue {:e})", ev[0]));
    }
    linalg::checked_inverse(&spec.h_matrix(u), "H").map_err(|e| format!("(III) {e}"))?;
    Ok(())
}

impl RelaxModel for GeneralHp {
    fn name(&self) -> &str {
        "general-hp"
    }

    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn flux_matrix(&self, state: &StateVec, eps: f64, dir: usize) -> DMatrix<f64> {
        let u = state.u();
        self.slow_flux(&u, dir) * eps + self.fast_flux(&u, dir)
    }

    fn source(&self, state: &StateVec, _eps: f64) -> DVector<f64> {
        let mut q = -state.entries().clone();
        q.rows_mut(0, self.dims.m()).fill(0.0);
        q
    }

    fn symmetrizer(&self, state: &StateVec, _eps: f64) -> DMatrix<f64> {
        let u = state.u();
        linalg::block_diag(&[(self.spec.a0)(&u), self.spec.b_matrix(&u)])
    }

    fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    fn eps_max(&self) -> f64 {
        1.0
    }

    fn affine_relaxation(&self, _u: &DVector<f64>, _eps: f64) -> Option<AffineRelaxation> {
        let r = self.dims.r();
        Some(AffineRelaxation {
            rates: DVector::from_element(r, 1.0),
            offset: DVector::zeros(r),
        })
    }

    // `a_j(u) u_x` is not a divergence unless `a_j` is constant
    fn conservative_u_rows(&self) -> bool {
        self.constant_advection
    }

    fn expected_a11(&self, state: &StateVec, eps: f64, dir: usize) -> Option<DMatrix<f64>> {
        Some((self.spec.advection)(&state.u(), dir) * eps)
    }
}
