//! Semilinear relaxation of the nonlinear diffusion equation `u_t = Laplace p(u)`
//! with two auxiliary variables, written in the scaled variables
//! `v = eps * v_hat`, `w = w_hat - p(u)`. State `(u, v_1, ..., v_d, w)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ScalarFn;
use crate::error::{Error, Result};
use crate::model::{AffineRelaxation, ModelDims, RelaxModel, StateBox, StateVec, TargetPde};

const BOX_SAMPLES: usize = 201;

#[derive(Clone)]
pub struct NlDiffSpec {
    pub d: usize,
    pub p: ScalarFn,
    pub dp: ScalarFn,
    /// Speed parameter; requires `0 < p'(u) < a^2`.
    pub a: f64,
    pub u_range: (f64, f64),
    pub w_range: (f64, f64),
}

impl NlDiffSpec {
    /// `p(u) = u^3` on `[0.5, 1.5]` with `a = 3`.
    pub fn cubic(d: usize) -> Self {
        Self {
            d,
            p: Arc::new(|u| u * u * u),
            dp: Arc::new(|u| 3.0 * u * u),
            a: 3.0,
            u_range: (0.5, 1.5),
            w_range: (-0.5, 0.5),
        }
    }

    /// Heat equation `p(u) = u` with `a = 2`.
    pub fn linear(d: usize) -> Self {
        Self {
            d,
            p: Arc::new(|u| u),
            dp: Arc::new(|_| 1.0),
            a: 2.0,
            u_range: (0.1, 2.0),
            w_range: (-0.5, 0.5),
        }
    }
}

pub struct NlDiff {
    spec: NlDiffSpec,
    dims: ModelDims,
    state_box: StateBox,
}

pub fn build_nldiff(spec: NlDiffSpec) -> Result<(NlDiff, TargetPde)> {
    let d = spec.d;
    let dims = ModelDims::new(d + 2, d + 1, d)?;
    let state_box = StateBox::uniform(dims, spec.u_range, spec.w_range)?;
    let a2 = spec.a * spec.a;
    for u in state_box.grid(0, BOX_SAMPLES) {
        let dp = (spec.dp)(u);
        if !(dp > 0.0 && dp < a2) {
            return Err(Error::Construction(format!(
                "nldiff: p'({u}) = {dp} violates 0 < p' < a^2 = {a2}"
            )));
        }
    }
    let dp = spec.dp.clone();
    let target = TargetPde::new(
        1,
        d,
        Arc::new(|_, _| DMatrix::zeros(1, 1)),
        Arc::new(move |u: &DVector<f64>, j, k| {
            DMatrix::from_element(1, 1, if j == k { dp(u[0]) } else { 0.0 })
        }),
    );
    Ok((
        NlDiff {
            spec,
            dims,
            state_box,
        },
        target,
    ))
}

impl RelaxModel for NlDiff {
    fn name(&self) -> &str {
        "nldiff"
    }

    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn flux_matrix(&self, state: &StateVec, _eps: f64, dir: usize) -> DMatrix<f64> {
        let (d, n) = (self.spec.d, self.dims.n());
        let dp = (self.spec.dp)(state.entries()[0]);
        let mut a = DMatrix::zeros(n, n);
        let vj = 1 + dir;
        a[(0, vj)] = 1.0;
        a[(vj, 0)] = dp;
        a[(vj, d + 1)] = 1.0;
        a[(d + 1, vj)] = self.spec.a * self.spec.a - dp;
        a
    }

    fn source(&self, state: &StateVec, _eps: f64) -> DVector<f64> {
        let mut q = -state.entries().clone();
        q[0] = 0.0;
        q
    }

    fn symmetrizer(&self, state: &StateVec, _eps: f64) -> DMatrix<f64> {
        let d = self.spec.d;
        let dp = (self.spec.dp)(state.entries()[0]);
        let mut diag = DVector::from_element(d + 2, 1.0);
        diag[0] = dp;
        diag[d + 1] = 1.0 / (self.spec.a * self.spec.a - dp);
        DMatrix::from_diagonal(&diag)
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

    fn spectral_radius(&self, _state: &StateVec, _eps: f64, _dir: usize) -> f64 {
        // eigenvalues of A_j are {0, +a, -a}
        self.spec.a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn linear_symmetrizer() {
        let (m, _) = build_nldiff(NlDiffSpec::linear(1)).unwrap();
        let s = StateVec::from_slice(m.dims(), &[1.0, 0.0, 0.0]).unwrap();
        let a0 = m.symmetrizer(&s, 0.0);
        let expected = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 1.0, 1.0 / 3.0]));
        assert!((a0 - expected).abs().max() < 1e-15);
    }

    #[test]
    fn spectral_radius_matches_eigenvalues() {
        let (m, _) = build_nldiff(NlDiffSpec::cubic(2)).unwrap();
        let s = StateVec::from_slice(m.dims(), &[1.2, 0.1, -0.1, 0.2]).unwrap();
        for dir in 0..2 {
            let rho = crate::model::generic_spectral_radius(&m.flux_matrix(&s, 0.1, dir));
            assert!((rho - 3.0).abs() < 1e-10, "{rho}");
        }
    }

    #[test]
    fn symmetric_products_in_2d() {
        let (m, _) = build_nldiff(NlDiffSpec::cubic(2)).unwrap();
        let s = StateVec::from_slice(m.dims(), &[0.8, 0.1, -0.1, 0.2]).unwrap();
        for dir in 0..2 {
            let prod = m.symmetrizer(&s, 0.0) * m.flux_matrix(&s, 0.0, dir);
            assert!(linalg::symmetry_defect(&prod) < 1e-14);
        }
    }

    #[test]
    fn rejects_speed_below_subcharacteristic_bound() {
        let mut spec = NlDiffSpec::cubic(1);
        spec.a = 2.0;
        assert!(matches!(build_nldiff(spec), Err(Error::Construction(_))));
    }
}
