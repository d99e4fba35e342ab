//! Jin-Xin type relaxation of a viscous system of conservation laws
//! `u_t + sum_j f_j(u)_{x_j} = sum_{j,k} (B_jk(u) u_{x_k})_{x_j}` that relaxes the
//! convective and diffusive fluxes together. State `(u, w_1, ..., w_d)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    sample_uniform, JacFn, MatFnU, PairMatFn, VecFnDir, CONSTRUCTION_SAMPLES, CONSTRUCTION_SEED,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{AffineRelaxation, ModelDims, RelaxModel, StateBox, StateVec, TargetPde};

#[derive(Clone)]
pub struct ViscousConsSpec {
    pub d: usize,
    /// Size of the target vector `u`.
    pub n_t: usize,
    /// `f_j(u)`.
    pub flux: VecFnDir,
    /// `f_j'(u)`.
    pub flux_jac: JacFn,
    /// `B_jk(u)`.
    pub diffusion: PairMatFn,
    /// Entropy Hessian `eta_uu(u)`.
    pub eta_uu: MatFnU,
    /// Relaxation speed parameter `a`.
    pub a: f64,
    pub u_range: (f64, f64),
    pub w_range: (f64, f64),
}

impl ViscousConsSpec {
    /// Scalar viscous Burgers: `f = u^2/2`, `B = nu`, `eta = u^2/2`.
    pub fn scalar_burgers(nu: f64) -> Self {
        Self {
            d: 1,
            n_t: 1,
            flux: Arc::new(|u, _| DVector::from_element(1, 0.5 * u[0] * u[0])),
            flux_jac: Arc::new(|u, _| DMatrix::from_element(1, 1, u[0])),
            diffusion: Arc::new(move |_, _, _| DMatrix::from_element(1, 1, nu)),
            eta_uu: Arc::new(|_| DMatrix::identity(1, 1)),
            a: 1.0,
            u_range: (0.1, 2.0),
            w_range: (-0.5, 0.5),
        }
    }

    /// Two-component system in two space dimensions with state-dependent,
    /// cross-coupled diffusion. `B = diag{eta_uu}^{-1} S(u)` with `S` SPD.
    pub fn coupled_2d() -> Self {
        let s0 = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.2, 0.3, 0.1, //
                0.2, 0.8, 0.1, 0.2, //
                0.3, 0.1, 1.2, 0.2, //
                0.1, 0.2, 0.2, 0.9,
            ],
        );
        let eta = DVector::from_column_slice(&[1.0, 2.0]);
        let big = Arc::new(move |u: &DVector<f64>| {
            let s = &s0 + DMatrix::identity(4, 4) * (0.1 * u.norm_squared());
            let mut b = s;
            for row in 0..4 {
                let scale = 1.0 / eta[row % 2];
                b.row_mut(row).scale_mut(scale);
            }
            b
        });
        Self {
            d: 2,
            n_t: 2,
            flux: Arc::new(|u, j| match j {
                0 => DVector::from_column_slice(&[0.5 * u[0] * u[0], u[0] * u[1]]),
                _ => DVector::from_column_slice(&[u[0] * u[1], 0.5 * u[1] * u[1]]),
            }),
            flux_jac: Arc::new(|u, j| match j {
                0 => DMatrix::from_row_slice(2, 2, &[u[0], 0.0, u[1], u[0]]),
                _ => DMatrix::from_row_slice(2, 2, &[u[1], u[0], 0.0, u[1]]),
            }),
            diffusion: Arc::new(move |u, j, k| big(u).view((2 * j, 2 * k), (2, 2)).into_owned()),
            eta_uu: Arc::new(|_| DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 2.0]))),
            a: 1.0,
            u_range: (0.1, 2.0),
            w_range: (-0.5, 0.5),
        }
    }
}

pub struct ViscousCons {
    spec: ViscousConsSpec,
    dims: ModelDims,
    state_box: StateBox,
}

impl ViscousCons {
    /// The `n_t d x n_t d` block matrix `B = [B_jk]`.
    pub fn big_diffusion(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let (nt, d) = (self.spec.n_t, self.spec.d);
        let mut b = DMatrix::zeros(nt * d, nt * d);
        for j in 0..d {
            for k in 0..d {
                b.view_mut((j * nt, k * nt), (nt, nt))
                    .copy_from(&(self.spec.diffusion)(u, j, k));
            }
        }
        b
    }

    /// `H = B + eps^2 a^2 (1 1^T kron I)`.
    pub fn h_matrix(&self, u: &DVector<f64>, eps: f64) -> DMatrix<f64> {
        let (nt, d) = (self.spec.n_t, self.spec.d);
        let mut h = self.big_diffusion(u);
        let shift = eps * eps * self.spec.a * self.spec.a;
        for j in 0..d {
            for k in 0..d {
                for i in 0..nt {
                    h[(j * nt + i, k * nt + i)] += shift;
                }
            }
        }
        h
    }

    fn eta_blocks(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let eta = (self.spec.eta_uu)(u);
        linalg::block_diag(&vec![eta; self.spec.d])
    }
}

pub fn build_viscous_cons(spec: ViscousConsSpec) -> Result<(ViscousCons, TargetPde)> {
    let (nt, d) = (spec.n_t, spec.d);
    if nt == 0 {
        return Err(Error::Construction("viscous-cons: n_t must be positive".into()));
    }
    if !(spec.a > 0.0) {
        return Err(Error::Construction("viscous-cons: relaxation speed a must be positive".into()));
    }
    let dims = ModelDims::new(nt * (1 + d), nt * d, d)?;
    let state_box = StateBox::uniform(dims, spec.u_range, spec.w_range)?;
    let model = ViscousCons {
        spec,
        dims,
        state_box,
    };

    // sampled (A1)-(A2) and invertibility of H
    let mut rng = ChaCha8Rng::seed_from_u64(CONSTRUCTION_SEED);
    for _ in 0..CONSTRUCTION_SAMPLES {
        let u = sample_uniform(&mut rng, nt, model.spec.u_range);
        let eta = (model.spec.eta_uu)(&u);
        require_spd(&eta, "eta_uu")?;
        let weighted = model.eta_blocks(&u) * model.big_diffusion(&u);
        require_spd(&weighted, "diag{eta_uu} B")?;
        for eps in [0.0, 1.0] {
            linalg::checked_inverse(&model.h_matrix(&u, eps), "viscous-cons H")
                .map_err(|e| Error::Construction(e.to_string()))?;
        }
    }

    let flux_jac = model.spec.flux_jac.clone();
    let diffusion = model.spec.diffusion.clone();
    let target = TargetPde::new(
        nt,
        d,
        Arc::new(move |u, j| flux_jac(u, j)),
        Arc::new(move |u, j, k| diffusion(u, j, k)),
    );
    Ok((model, target))
}

fn require_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let scale = linalg::max_abs(m).max(f64::MIN_POSITIVE);
    if linalg::symmetry_defect(m) > 1e-10 * scale {
        return Err(Error::Construction(format!("viscous-cons: {what} is not symmetric")));
    }
    let ev = linalg::sym_eigenvalues(m);
    if !(ev[0] > 0.0) {
        return Err(Error::Construction(format!(
            "viscous-cons: {what} is not positive definite (min eigenvalue {:.3e})",
            ev[0]
        )));
    }
    Ok(())
}

impl RelaxModel for ViscousCons {
    fn name(&self) -> &str {
        "viscous-cons"
    }

    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn flux_matrix(&self, state: &StateVec, eps: f64, dir: usize) -> DMatrix<f64> {
        let (nt, d, n) = (self.spec.n_t, self.spec.d, self.dims.n());
        let u = state.u();
        let shift = eps * eps * self.spec.a * self.spec.a;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..nt {
            a[(i, nt + dir * nt + i)] = 1.0;
        }
        for row_block in 0..d {
            let mut blk = (self.spec.diffusion)(&u, row_block, dir);
            for i in 0..nt {
                blk[(i, i)] += shift;
            }
            a.view_mut((nt + row_block * nt, 0), (nt, nt)).copy_from(&blk);
        }
        a
    }

    fn source(&self, state: &StateVec, eps: f64) -> DVector<f64> {
        let (nt, d) = (self.spec.n_t, self.spec.d);
        let u = state.u();
        let mut q = DVector::zeros(self.dims.n());
        for j in 0..d {
            let f = (self.spec.flux)(&u, j);
            for i in 0..nt {
                let idx = nt + j * nt + i;
                q[idx] = eps * f[i] - state.entries()[idx];
            }
        }
        q
    }

    fn symmetrizer(&self, state: &StateVec, eps: f64) -> DMatrix<f64> {
        let u = state.u();
        let eta = (self.spec.eta_uu)(&u);
        let h_inv = linalg::inverse_or_nan(&self.h_matrix(&u, eps));
        let lower = self.eta_blocks(&u) * h_inv;
        linalg::block_diag(&[eta, lower])
    }

    fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    fn eps_max(&self) -> f64 {
        // diag{eta} H = diag{eta} B + eps^2 a^2 (PSD) stays positive definite
        1.0
    }

    fn affine_relaxation(&self, u: &DVector<f64>, eps: f64) -> Option<AffineRelaxation> {
        let (nt, d) = (self.spec.n_t, self.spec.d);
        let mut offset = DVector::zeros(nt * d);
        for j in 0..d {
            let f = (self.spec.flux)(u, j);
            offset.rows_mut(j * nt, nt).copy_from(&(f * eps));
        }
        Some(AffineRelaxation {
            rates: DVector::from_element(nt * d, 1.0),
            offset,
        })
    }

    fn spectral_radius(&self, state: &StateVec, eps: f64, dir: usize) -> f64 {
        if self.spec.n_t == 1 && self.spec.d == 1 {
            let u = state.u();
            let b = (self.spec.diffusion)(&u, 0, 0)[(0, 0)];
            (b + eps * eps * self.spec.a * self.spec.a).max(0.0).sqrt()
        } else {
            crate::model::generic_spectral_radius(&self.flux_matrix(state, eps, dir))
        }
    }
}
