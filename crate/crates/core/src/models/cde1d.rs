//! Diffusive relaxation of the 1D convection-diffusion equation
//! `u_t + f(u)_x = b(u)_xx`, in the scaled variable `w = eps * v`:
//!
//! ```text
//! u_t + w_x / eps = 0
//! w_t + b(u)_x / eps = (-w + eps f(u)) / eps^2
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::ScalarFn;
use crate::error::{Error, Result};
use crate::model::{AffineRelaxation, ModelDims, RelaxModel, StateBox, StateVec, TargetPde};

/// Safety factor applied to the subcharacteristic bound when setting `eps_max`.
pub const SUBCHARACTERISTIC_SAFETY: f64 = 0.9;

const BOX_SAMPLES: usize = 201;

#[derive(Clone)]
pub struct Cde1dSpec {
    pub f: ScalarFn,
    pub df: ScalarFn,
    pub b: ScalarFn,
    pub db: ScalarFn,
    pub u_range: (f64, f64),
    pub w_range: (f64, f64),
}

impl Cde1dSpec {
    /// `f = u^2/2`, `b = u^2/2` on `u in [0.1, 2.5]`.
    pub fn burgers() -> Self {
        Self {
            f: Arc::new(|u| 0.5 * u * u),
            df: Arc::new(|u| u),
            b: Arc::new(|u| 0.5 * u * u),
            db: Arc::new(|u| u),
            u_range: (0.1, 2.5),
            w_range: (-0.5, 0.5),
        }
    }

    /// `f = 0`, `b = u`: the telegraph relaxation of the heat equation.
    pub fn linear_heat() -> Self {
        Self {
            f: Arc::new(|_| 0.0),
            df: Arc::new(|_| 0.0),
            b: Arc::new(|u| u),
            db: Arc::new(|_| 1.0),
            u_range: (0.1, 2.5),
            w_range: (-0.5, 0.5),
        }
    }
}

pub struct Cde1d {
    spec: Cde1dSpec,
    dims: ModelDims,
    state_box: StateBox,
    eps_max: f64,
}

impl Cde1d {
    pub fn spec(&self) -> &Cde1dSpec {
        &self.spec
    }
}

/// Builds the model and its target. `eps_max` is `0.9 * min sqrt(b') / |f'|`
/// over the state box, capped at 1.
pub fn build_cde1d(spec: Cde1dSpec) -> Result<(Cde1d, TargetPde)> {
    let dims = ModelDims::new(2, 1, 1)?;
    let state_box = StateBox::from_ranges(&[spec.u_range], &[spec.w_range])?;

    let mut bound = f64::INFINITY;
    for u in state_box.grid(0, BOX_SAMPLES) {
        let db = (spec.db)(u);
        if !(db > 0.0) {
            return Err(Error::Construction(format!("cde1d: b'({u}) = {db} is not positive")));
        }
        let df = (spec.df)(u).abs();
        if df > 0.0 {
            bound = bound.min(db.sqrt() / df);
        }
    }
    let eps_max = (SUBCHARACTERISTIC_SAFETY * bound).min(1.0);

    let df = spec.df.clone();
    let db = spec.db.clone();
    let target = TargetPde::new(
        1,
        1,
        Arc::new(move |u: &DVector<f64>, _| DMatrix::from_element(1, 1, df(u[0]))),
        Arc::new(move |u: &DVector<f64>, _, _| DMatrix::from_element(1, 1, db(u[0]))),
    );
    Ok((
        Cde1d {
            spec,
            dims,
            state_box,
            eps_max,
        },
        target,
    ))
}

impl RelaxModel for Cde1d {
    fn name(&self) -> &str {
        "cde1d"
    }

    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn flux_matrix(&self, state: &StateVec, _eps: f64, _dir: usize) -> DMatrix<f64> {
        let u = state.entries()[0];
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, (self.spec.db)(u), 0.0])
    }

    fn source(&self, state: &StateVec, eps: f64) -> DVector<f64> {
        let (u, w) = (state.entries()[0], state.entries()[1]);
        DVector::from_column_slice(&[0.0, -w + eps * (self.spec.f)(u)])
    }

    fn symmetrizer(&self, state: &StateVec, eps: f64) -> DMatrix<f64> {
        let u = state.entries()[0];
        let c = eps * (self.spec.df)(u);
        DMatrix::from_row_slice(2, 2, &[(self.spec.db)(u), c, c, 1.0])
    }

    fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    fn eps_max(&self) -> f64 {
        self.eps_max
    }

    fn affine_relaxation(&self, u: &DVector<f64>, eps: f64) -> Option<AffineRelaxation> {
        Some(AffineRelaxation {
            rates: DVector::from_element(1, 1.0),
            offset: DVector::from_element(1, eps * (self.spec.f)(u[0])),
        })
    }

    fn spectral_radius(&self, state: &StateVec, _eps: f64, _dir: usize) -> f64 {
        (self.spec.db)(state.entries()[0]).max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    fn state(m: &Cde1d, u: f64, w: f64) -> StateVec {
        StateVec::from_slice(m.dims(), &[u, w]).unwrap()
    }

    #[test]
    fn identity_symmetrizer_for_pure_diffusion() {
        let (m, _) = build_cde1d(Cde1dSpec::linear_heat()).unwrap();
        let s = state(&m, 1.0, 0.2);
        let a0 = m.symmetrizer(&s, 0.3);
        assert_eq!(a0, DMatrix::identity(2, 2));
        let prod = &a0 * m.flux_matrix(&s, 0.3, 0);
        assert_eq!(prod, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(m.eps_max(), 1.0);
    }

    #[test]
    fn eps_max_from_subcharacteristic_bound() {
        let spec = Cde1dSpec {
            f: Arc::new(|u| u),
            df: Arc::new(|_| 1.0),
            b: Arc::new(|u| 0.5 * u * u),
            db: Arc::new(|u| u),
            u_range: (0.5, 1.5),
            w_range: (-0.5, 0.5),
        };
        let (m, _) = build_cde1d(spec).unwrap();
        let expected = 0.9 * 0.5_f64.sqrt();
        assert!((m.eps_max() - expected).abs() < 1e-12, "{}", m.eps_max());
        assert!((m.eps_max() - 0.636).abs() < 1e-3);
    }

    #[test]
    fn symmetrizer_evaluated() {
        let spec = Cde1dSpec {
            f: Arc::new(|u| u),
            df: Arc::new(|_| 1.0),
            b: Arc::new(|u| u * u),
            db: Arc::new(|u| 2.0 * u),
            u_range: (0.5, 1.5),
            w_range: (-0.5, 0.5),
        };
        let (m, _) = build_cde1d(spec).unwrap();
        let a0 = m.symmetrizer(&state(&m, 1.0, 0.0), 0.1);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        assert!((a0 - expected).abs().max() < 1e-15);
    }

    #[test]
    fn nonpositive_diffusion_rejected() {
        let mut spec = Cde1dSpec::burgers();
        spec.u_range = (-1.0, 1.0);
        assert!(matches!(build_cde1d(spec), Err(Error::Construction(_))));
    }

    #[test]
    fn positive_definiteness_tracks_subcharacteristic_condition() {
        let (m, _) = build_cde1d(Cde1dSpec::burgers()).unwrap();
        for &u in &[0.2_f64, 1.0, 1.9] {
            // critical eps where eps |f'| = sqrt(b')
            let crit = u.sqrt() / u;
            let inside = linalg::sym_eigenvalues(&m.symmetrizer(&state(&m, u, 0.0), 0.99 * crit));
            assert!(inside[0] > 0.0);
            let outside = linalg::sym_eigenvalues(&m.symmetrizer(&state(&m, u, 0.0), 1.01 * crit));
            assert!(outside[0] < 0.0);
        }
    }
}
