//! D2Q5 lattice Boltzmann equation for the 2D convection-diffusion equation
//! `u_t + div f(u) = div(D(u) grad u)`, in the variables
//! `(u, h_2, ..., h_5)` with `h_i = g_i - omega_i u`.
//!
//! The relaxation time is tied to the diffusion coefficient by `tau = 3 D`,
//! the relation under which the diffusive limit of the kinetic system has
//! diffusion coefficient `D` (the second velocity moment of the weights is `I/3`).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ScalarFn;
use crate::error::{Error, Result};
use crate::model::{AffineRelaxation, ModelDims, RelaxModel, StateBox, StateVec, TargetPde};

pub const WEIGHTS: [f64; 5] = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
pub const VELOCITIES: [[f64; 2]; 5] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];

/// `tau = TAU_PER_DIFFUSION * D` reproduces the target diffusion coefficient.
pub const TAU_PER_DIFFUSION: f64 = 3.0;

const BOX_SAMPLES: usize = 201;

pub type Flux2Fn = Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct LbeD2q5Spec {
    pub f: Flux2Fn,
    pub df: Flux2Fn,
    pub diffusion: ScalarFn,
    /// Multiplier on the relaxation time; `1` gives the consistent choice.
    pub tau_scale: f64,
    pub u_range: (f64, f64),
    pub w_range: (f64, f64),
}

impl LbeD2q5Spec {
    /// `f = (c_x u, c_y u)`, constant `D`.
    pub fn linear(cx: f64, cy: f64, diffusion: f64) -> Self {
        Self {
            f: Arc::new(move |u| [cx * u, cy * u]),
            df: Arc::new(move |_| [cx, cy]),
            diffusion: Arc::new(move |_| diffusion),
            tau_scale: 1.0,
            u_range: (0.1, 2.0),
            w_range: (-0.5, 0.5),
        }
    }

    /// `f = (u^2/2, u^2/4)`, `D(u) = 0.1 (1 + u)`.
    pub fn nonlinear() -> Self {
        Self {
            f: Arc::new(|u| [0.5 * u * u, 0.25 * u * u]),
            df: Arc::new(|u| [u, 0.5 * u]),
            diffusion: Arc::new(|u| 0.1 * (1.0 + u)),
            tau_scale: 1.0,
            u_range: (0.1, 2.0),
            w_range: (-0.5, 0.5),
        }
    }
}

pub struct LbeD2q5 {
    spec: LbeD2q5Spec,
    dims: ModelDims,
    state_box: StateBox,
    flux: [DMatrix<f64>; 2],
}

/// Equilibrium distribution `g_i^eq = omega_i u + 3 eps omega_i xi_i . f(u)`.
pub fn equilibrium(u: f64, eps: f64, f: [f64; 2]) -> [f64; 5] {
    let mut g = [0.0; 5];
    for i in 0..5 {
        let xf = VELOCITIES[i][0] * f[0] + VELOCITIES[i][1] * f[1];
        g[i] = WEIGHTS[i] * u + 3.0 * eps * WEIGHTS[i] * xf;
    }
    g
}

/// Constant convection matrix `A_j` in the `(u, h_2..h_5)` variables.
pub fn flux_matrix_constant(dir: usize) -> DMatrix<f64> {
    let xi = |i: usize| VELOCITIES[i][dir] - VELOCITIES[0][dir];
    let mut a = DMatrix::zeros(5, 5);
    for k in 1..5 {
        a[(0, k)] = xi(k);
    }
    for i in 1..5 {
        a[(i, 0)] = WEIGHTS[i] * VELOCITIES[i][dir];
        for k in 1..5 {
            a[(i, k)] = -WEIGHTS[i] * xi(k);
        }
        a[(i, i)] += VELOCITIES[i][dir];
    }
    a
}

/// Transformation matrix with `A_j P = P diag{xi^(j)}`.
pub fn transformation_matrix() -> DMatrix<f64> {
    let mut p = DMatrix::zeros(5, 5);
    for c in 0..5 {
        p[(0, c)] = 1.0;
    }
    for i in 1..5 {
        for c in 0..5 {
            p[(i, c)] = -WEIGHTS[i];
        }
        p[(i, i)] += 1.0;
    }
    p
}

/// Closed-form symmetrizer `diag{1/6, (1/2) 1 1^T + I_4}`.
pub fn symmetrizer_constant() -> DMatrix<f64> {
    let mut a0 = DMatrix::from_element(5, 5, 0.5);
    a0[(0, 0)] = 1.0 / 6.0;
    for k in 1..5 {
        a0[(0, k)] = 0.0;
        a0[(k, 0)] = 0.0;
        a0[(k, k)] += 1.0;
    }
    a0
}

impl LbeD2q5 {
    pub fn tau(&self, u: f64) -> f64 {
        TAU_PER_DIFFUSION * self.spec.tau_scale * (self.spec.diffusion)(u)
    }
}

pub fn build_lbe_d2q5(spec: LbeD2q5Spec) -> Result<(LbeD2q5, TargetPde)> {
    let dims = ModelDims::new(5, 4, 2)?;
    let state_box = StateBox::uniform(dims, spec.u_range, spec.w_range)?;
    if !(spec.tau_scale > 0.0) {
        return Err(Error::Construction("lbe-d2q5: tau_scale must be positive".into()));
    }
    for u in state_box.grid(0, BOX_SAMPLES) {
        let d = (spec.diffusion)(u);
        if !(d > 0.0) {
            return Err(Error::Construction(format!("lbe-d2q5: D({u}) = {d} is not positive")));
        }
    }
    let df = spec.df.clone();
    let diffusion = spec.diffusion.clone();
    let target = TargetPde::new(
        1,
        2,
        Arc::new(move |u: &DVector<f64>, j| DMatrix::from_element(1, 1, df(u[0])[j])),
        Arc::new(move |u: &DVector<f64>, j, k| {
            DMatrix::from_element(1, 1, if j == k { diffusion(u[0]) } else { 0.0 })
        }),
    );
    Ok((
        LbeD2q5 {
            spec,
            dims,
            state_box,
            flux: [flux_matrix_constant(0), flux_matrix_constant(1)],
        },
        target,
    ))
}

impl RelaxModel for LbeD2q5 {
    fn name(&self) -> &str {
        "lbe-d2q5"
    }

    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn flux_matrix(&self, _state: &StateVec, _eps: f64, dir: usize) -> DMatrix<f64> {
        self.flux[dir].clone()
    }

    fn source(&self, state: &StateVec, eps: f64) -> DVector<f64> {
        let u = state.entries()[0];
        let tau = self.tau(u);
        let f = (self.spec.f)(u);
        let mut q = DVector::zeros(5);
        for i in 1..5 {
            let xf = VELOCITIES[i][0] * f[0] + VELOCITIES[i][1] * f[1];
            q[i] = (3.0 * eps * WEIGHTS[i] * xf - state.entries()[i]) / tau;
        }
        q
    }

    fn symmetrizer(&self, _state: &StateVec, _eps: f64) -> DMatrix<f64> {
        symmetrizer_constant()
    }

    fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    fn eps_max(&self) -> f64 {
        1.0
    }

    fn affine_relaxation(&self, u: &DVector<f64>, eps: f64) -> Option<AffineRelaxation> {
        let tau = self.tau(u[0]);
        let f = (self.spec.f)(u[0]);
        let offset = DVector::from_iterator(
            4,
            (1..5).map(|i| {
                let xf = VELOCITIES[i][0] * f[0] + VELOCITIES[i][1] * f[1];
                3.0 * eps * WEIGHTS[i] * xf / tau
            }),
        );
        Some(AffineRelaxation {
            rates: DVector::from_element(4, 1.0 / tau),
            offset,
        })
    }

    fn state_independent_flux(&self) -> bool {
        true
    }

    fn spectral_radius(&self, _state: &StateVec, _eps: f64, _dir: usize) -> f64 {
        // similar to diag{xi^(j)}
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn weights_sum_to_one_and_second_moment_is_third() {
        let total: f64 = WEIGHTS.iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        for a in 0..2 {
            for b in 0..2 {
                let m: f64 = (0..5)
                    .map(|i| 3.0 * WEIGHTS[i] * VELOCITIES[i][a] * VELOCITIES[i][b])
                    .sum();
                assert!((m - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn equilibrium_moments() {
        let g = equilibrium(1.3, 0.1, [1.0, 0.0]);
        let zeroth: f64 = g.iter().sum();
        assert!((zeroth - 1.3).abs() < 1e-15);
        let first = [0, 1].map(|a| (0..5).map(|i| VELOCITIES[i][a] * g[i]).sum::<f64>());
        assert!((first[0] - 0.1).abs() < 1e-15);
        assert!(first[1].abs() < 1e-15);
    }

    #[test]
    fn transformation_matrix_has_unit_determinant() {
        let p = transformation_matrix();
        assert!((p.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_to_velocity_diagonal() {
        let p = transformation_matrix();
        for dir in 0..2 {
            let diag = DMatrix::from_diagonal(&DVector::from_iterator(5, (0..5).map(|i| VELOCITIES[i][dir])));
            let lhs = flux_matrix_constant(dir) * &p;
            let rhs = &p * diag;
            assert!((lhs - rhs).abs().max() < 1e-15);
        }
    }

    #[test]
    fn closed_form_symmetrizer_matches_transformed_diagonal() {
        let p_inv = transformation_matrix().try_inverse().unwrap();
        let mut d = DMatrix::identity(5, 5);
        d[(0, 0)] = 0.5;
        let via_p = p_inv.transpose() * d * &p_inv;
        assert!((via_p - symmetrizer_constant()).abs().max() < 1e-14);
    }

    #[test]
    fn symmetrized_products() {
        let a0 = symmetrizer_constant();
        for dir in 0..2 {
            let prod = &a0 * flux_matrix_constant(dir);
            assert!(linalg::symmetry_defect(&prod) < 1e-15);
        }
    }
}
