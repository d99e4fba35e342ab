//! Relaxation-model and target-PDE abstractions.
//!
//! A relaxation model is the first-order system
//!
//! ```text
//! dU/dt + (1/eps) sum_j A_j(U; eps) dU/dx_j = (1/eps^2) Q(U; eps)
//! ```
//!
//! with the state partitioned as `U = (u, w)`: `u` holds the `m = n - r` target
//! variables and `w` the `r` relaxed variables. The target is the
//! hyperbolic-parabolic system
//!
//! ```text
//! du/dt + sum_j a_j(u) du/dx_j = sum_{j,k} d/dx_j (D_jk(u) du/dx_k)
//! ```

mod jacobian;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

pub use jacobian::{
    flux_block, jac_flux_block, jac_source_wrt_eps, jac_source_wrt_state, Block, FdScheme,
    JacobianConfig, Wrt,
};

/// Dimensions of a relaxation system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelDims {
    n: usize,
    r: usize,
    d: usize,
}

impl ModelDims {
    pub fn new(n: usize, r: usize, d: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Construction(format!("state dimension n = {n} must be at least 2")));
        }
        if r == 0 || r >= n {
            return Err(Error::Construction(format!(
                "relaxed dimension r = {r} must satisfy 1 <= r <= n - 1 = {}",
                n - 1
            )));
        }
        if !(1..=3).contains(&d) {
            return Err(Error::Construction(format!("space dimension d = {d} must be 1, 2 or 3")));
        }
        Ok(Self { n, r, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of target (equilibrium) variables, `n - r`.
    pub fn m(&self) -> usize {
        self.n - self.r
    }
}

/// A state vector `U = (u, w)` tied to its model dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec {
    entries: DVector<f64>,
    dims: ModelDims,
}

impl StateVec {
    pub fn new(dims: ModelDims, entries: DVector<f64>) -> Result<Self> {
        if entries.len() != dims.n() {
            return Err(Error::Config(format!(
                "state has {} entries, model expects {}",
                entries.len(),
                dims.n()
            )));
        }
        Ok(Self { entries, dims })
    }

    pub fn from_slice(dims: ModelDims, entries: &[f64]) -> Result<Self> {
        Self::new(dims, DVector::from_column_slice(entries))
    }

    pub fn from_parts(dims: ModelDims, u: &DVector<f64>, w: &DVector<f64>) -> Result<Self> {
        if u.len() != dims.m() || w.len() != dims.r() {
            return Err(Error::Config(format!(
                "partition sizes ({}, {}) do not match (m, r) = ({}, {})",
                u.len(),
                w.len(),
                dims.m(),
                dims.r()
            )));
        }
        let mut entries = DVector::zeros(dims.n());
        entries.rows_mut(0, dims.m()).copy_from(u);
        entries.rows_mut(dims.m(), dims.r()).copy_from(w);
        Ok(Self { entries, dims })
    }

    /// The equilibrium state `(u, 0)`.
    pub fn equilibrium(dims: ModelDims, u: &DVector<f64>) -> Result<Self> {
        Self::from_parts(dims, u, &DVector::zeros(dims.r()))
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut DVector<f64> {
        &mut self.entries
    }

    pub fn into_entries(self) -> DVector<f64> {
        self.entries
    }

    pub fn u(&self) -> DVector<f64> {
        self.entries.rows(0, self.dims.m()).into_owned()
    }

    pub fn w(&self) -> DVector<f64> {
        self.entries.rows(self.dims.m(), self.dims.r()).into_owned()
    }

    /// Copy of this state with entry `i` shifted by `delta`.
    pub(crate) fn shifted(&self, i: usize, delta: f64) -> Self {
        let mut s = self.clone();
        s.entries[i] += delta;
        s
    }
}

/// Per-entry admissible intervals for a model's state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl StateBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Config("state box bounds differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config("state box has an empty interval".into()));
        }
        Ok(Self { lower, upper })
    }

    /// Box whose first `u.len()` entries come from `u` and the rest from `w`.
    pub fn from_ranges(u: &[(f64, f64)], w: &[(f64, f64)]) -> Result<Self> {
        let (lower, upper) = u.iter().chain(w).map(|&(l, h)| (l, h)).unzip();
        Self::new(lower, upper)
    }

    /// Box with identical intervals for every `u` entry and every `w` entry.
    pub fn uniform(dims: ModelDims, u: (f64, f64), w: (f64, f64)) -> Result<Self> {
        Self::from_ranges(&vec![u; dims.m()], &vec![w; dims.r()])
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.lower[i], self.upper[i])
    }

    pub fn check(&self, entries: &DVector<f64>) -> Result<()> {
        for (i, &v) in entries.iter().enumerate() {
            let (l, h) = (self.lower[i], self.upper[i]);
            if !(v >= l && v <= h) {
                return Err(Error::Domain {
                    index: i,
                    value: v,
                    lower: l,
                    upper: h,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, entries: &DVector<f64>) -> bool {
        self.check(entries).is_ok()
    }

    /// Uniform sample inside the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.lower.len(),
            self.lower.iter().zip(&self.upper).map(|(&l, &h)| {
                if h > l {
                    rng.random_range(l..=h)
                } else {
                    l
                }
            }),
        )
    }

    /// Evenly spaced points over the interval of entry `i`, endpoints included.
    pub fn grid(&self, i: usize, points: usize) -> Vec<f64> {
        let (l, h) = self.interval(i);
        if points <= 1 {
            return vec![0.5 * (l + h)];
        }
        (0..points)
            .map(|k| l + (h - l) * k as f64 / (points - 1) as f64)
            .collect()
    }
}

/// Affine relaxation structure `q(u, w; eps) = offset(u; eps) - rates(u) * w`
/// (entrywise), shared by every builtin model.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRelaxation {
    pub rates: DVector<f64>,
    pub offset: DVector<f64>,
}

/// A relaxation system with its candidate symmetrizer.
///
/// All callbacks must be pure and defined at `eps = 0`.
pub trait RelaxModel: Send + Sync {
    fn name(&self) -> &str;

    fn dims(&self) -> ModelDims;

    /// `A_j(U; eps)` for direction `dir` (0-based).
    fn flux_matrix(&self, state: &StateVec, eps: f64, dir: usize) -> DMatrix<f64>;

    /// `Q(U; eps)`.
    fn source(&self, state: &StateVec, eps: f64) -> DVector<f64>;

    /// Candidate symmetrizer `A_0(U; eps)`.
    fn symmetrizer(&self, state: &StateVec, eps: f64) -> DMatrix<f64>;

    fn state_box(&self) -> &StateBox;

    /// Largest `eps` for which the symmetrizer is claimed positive definite.
    fn eps_max(&self) -> f64;

    /// Flux whose Jacobian equals the first `m` rows of `A_j`; discretized in
    /// conservation form by the solver. The default is exact whenever those
    /// rows do not depend on the state.
    fn conserved_flux(&self, state: &StateVec, eps: f64, dir: usize) -> DVector<f64> {
        let m = self.dims().m();
        let a = self.flux_matrix(state, eps, dir);
        a.rows(0, m) * state.entries()
    }

    /// Whether the first `m` rows of the system are in divergence form with
    /// flux [`RelaxModel::conserved_flux`]. When false the solver discretizes
    /// them in quasilinear form and the grid sum of `u` is not conserved.
    fn conservative_u_rows(&self) -> bool {
        true
    }

    /// Whether `A_j` and its spectral-radius bound are independent of the
    /// state, letting the solver evaluate them once per direction.
    fn state_independent_flux(&self) -> bool {
        false
    }

    /// Affine structure of `q` in `w`, when the model has one.
    fn affine_relaxation(&self, _u: &DVector<f64>, _eps: f64) -> Option<AffineRelaxation> {
        None
    }

    /// Bound on the spectral radius of `A_j(U; eps)`.
    fn spectral_radius(&self, state: &StateVec, eps: f64, dir: usize) -> f64 {
        let a = self.flux_matrix(state, eps, dir);
        generic_spectral_radius(&a)
    }

    /// Closed form of `A_j^{11}(U; eps)` for models that promise one.
    fn expected_a11(&self, _state: &StateVec, _eps: f64, _dir: usize) -> Option<DMatrix<f64>> {
        None
    }
}

impl fmt::Debug for dyn RelaxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RelaxModel")
            .field("name", &self.name())
            .field("dims", &self.dims())
            .finish()
    }
}

pub(crate) fn generic_spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let ev = a.clone().complex_eigenvalues();
    let rho = ev.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    if rho.is_finite() {
        rho
    } else {
        // infinity norm bounds the spectral radius
        a.row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

pub type MatrixFn = Arc<dyn Fn(&DVector<f64>, usize) -> DMatrix<f64> + Send + Sync>;
pub type DiffusionFn = Arc<dyn Fn(&DVector<f64>, usize, usize) -> DMatrix<f64> + Send + Sync>;
pub type SolutionFn = Arc<dyn Fn(&[f64], f64) -> DVector<f64> + Send + Sync>;

/// Target hyperbolic-parabolic system.
#[derive(Clone)]
pub struct TargetPde {
    m: usize,
    d: usize,
    advection: MatrixFn,
    diffusion: DiffusionFn,
    exact_solution: Option<SolutionFn>,
}

impl TargetPde {
    pub fn new(m: usize, d: usize, advection: MatrixFn, diffusion: DiffusionFn) -> Self {
        Self {
            m,
            d,
            advection,
            diffusion,
            exact_solution: None,
        }
    }

    pub fn with_exact_solution(mut self, exact: SolutionFn) -> Self {
        self.exact_solution = Some(exact);
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `a_j(u)`.
    pub fn advection(&self, u: &DVector<f64>, dir: usize) -> DMatrix<f64> {
        (self.advection)(u, dir)
    }

    /// `D_jk(u)`.
    pub fn diffusion(&self, u: &DVector<f64>, j: usize, k: usize) -> DMatrix<f64> {
        (self.diffusion)(u, j, k)
    }

    pub fn exact_solution(&self) -> Option<&SolutionFn> {
        self.exact_solution.as_ref()
    }
}

impl fmt::Debug for TargetPde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetPde")
            .field("m", &self.m)
            .field("d", &self.d)
            .field("has_exact_solution", &self.exact_solution.is_some())
            .finish()
    }
}

pub type FluxCallback = Arc<dyn Fn(&StateVec, f64, usize) -> DMatrix<f64> + Send + Sync>;
pub type SourceCallback = Arc<dyn Fn(&StateVec, f64) -> DVector<f64> + Send + Sync>;
pub type SymmetrizerCallback = Arc<dyn Fn(&StateVec, f64) -> DMatrix<f64> + Send + Sync>;

/// Relaxation model assembled from plain callbacks. Used for hand-built
/// systems such as the negative controls of the criteria checks.
#[derive(Clone)]
pub struct CallbackModel {
    name: String,
    dims: ModelDims,
    flux: FluxCallback,
    source: SourceCallback,
    symmetrizer: SymmetrizerCallback,
    state_box: StateBox,
    eps_max: f64,
}

impl CallbackModel {
    pub fn new(
        name: impl Into<String>,
        dims: ModelDims,
        flux: FluxCallback,
        source: SourceCallback,
        symmetrizer: SymmetrizerCallback,
        state_box: StateBox,
        eps_max: f64,
    ) -> Result<Self> {
        if state_box.len() != dims.n() {
            return Err(Error::Construction(format!(
                "state box has {} entries, model has n = {}",
                state_box.len(),
                dims.n()
            )));
        }
        if !(eps_max > 0.0) {
            return Err(Error::Construction("eps_max must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            dims,
            flux,
            source,
            symmetrizer,
            state_box,
            eps_max,
        })
    }
}

impl RelaxModel for CallbackModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn flux_matrix(&self, state: &StateVec, eps: f64, dir: usize) -> DMatrix<f64> {
        (self.flux)(state, eps, dir)
    }

    fn source(&self, state: &StateVec, eps: f64) -> DVector<f64> {
        (self.source)(state, eps)
    }

    fn symmetrizer(&self, state: &StateVec, eps: f64) -> DMatrix<f64> {
        (self.symmetrizer)(state, eps)
    }

    fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    fn eps_max(&self) -> f64 {
        self.eps_max
    }
}

/// Validates a state and `eps` before a callback evaluation.
pub(crate) fn check_inputs(model: &dyn RelaxModel, state: &StateVec, eps: f64) -> Result<()> {
    if !(eps >= 0.0) {
        return Err(Error::NegativeEps(eps));
    }
    model.state_box().check(state.entries())
}

pub(crate) fn finite_matrix(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if linalg::is_finite(&m) {
        Ok(m)
    } else {
        Err(Error::eval(what))
    }
}

pub(crate) fn finite_vector(v: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if linalg::is_finite_vec(&v) {
        Ok(v)
    } else {
        Err(Error::eval(what))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dims_reject_degenerate_partitions() {
        assert!(ModelDims::new(2, 0, 1).is_err());
        assert!(ModelDims::new(2, 2, 1).is_err());
        assert!(ModelDims::new(1, 1, 1).is_err());
        assert!(ModelDims::new(3, 1, 4).is_err());
        let dims = ModelDims::new(5, 4, 2).unwrap();
        assert_eq!(dims.m(), 1);
    }

    #[test]
    fn state_partition() {
        let dims = ModelDims::new(4, 3, 1).unwrap();
        let s = StateVec::from_slice(dims, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.u().as_slice(), &[1.0]);
        assert_eq!(s.w().as_slice(), &[2.0, 3.0, 4.0]);
        assert!(StateVec::from_slice(dims, &[1.0]).is_err());
    }

    #[test]
    fn box_samples_stay_inside() {
        let dims = ModelDims::new(3, 2, 1).unwrap();
        let b = StateBox::uniform(dims, (0.1, 2.0), (-0.5, 0.5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert!(b.contains(&b.sample(&mut rng)));
        }
        let outside = DVector::from_column_slice(&[3.0, 0.0, 0.0]);
        assert!(matches!(b.check(&outside), Err(Error::Domain { index: 0, .. })));
    }
}
