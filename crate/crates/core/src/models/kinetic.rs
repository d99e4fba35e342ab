//! Diffusive kinetic BGK approximation of the parabolic system
//! `u_t + sum_j F_j(u)_{x_j} = sum_j B(u)_{x_j x_j}`, written in the macroscopic
//! variables `U = (u, g_2, ..., g_{N+N'})` where `g_l = f_l - M_l(u)` and
//! `g_{N+m} = f_{N+m} - B(u) / (N' theta^2)`.
//!
//! In these variables `A_j = P A~_j P^{-1}` with `P = dU/df` and
//! `A~_j = diag{eps lambda_lj I, sigma_mj (eps mu + theta sqrt(N')) I}`, and the
//! source is `Q = -(0, w)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{sample_uniform, JacFn, MatFnU, VecFnDir, VecFnU, CONSTRUCTION_SAMPLES, CONSTRUCTION_SEED, SIGMA_1D};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{AffineRelaxation, ModelDims, RelaxModel, StateBox, StateVec, TargetPde};

/// Residual allowed in the Maxwellian moment constraints on construction samples.
pub const MAXWELLIAN_TOLERANCE: f64 = 1e-8;

pub type IndexedVecFn = Arc<dyn Fn(&DVector<f64>, usize) -> DVector<f64> + Send + Sync>;
pub type IndexedMatFn = Arc<dyn Fn(&DVector<f64>, usize) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub struct KineticBgkSpec {
    /// Size `K` of the target vector.
    pub k: usize,
    pub d: usize,
    /// `lambda[l][j]`, `l < N`.
    pub lambda: Vec<Vec<f64>>,
    /// `sigma[m][j]`, `m < N'`.
    pub sigma: Vec<Vec<f64>>,
    pub theta: f64,
    pub mu: f64,
    /// `M_l(u)` and its Jacobian.
    pub maxwellian: IndexedVecFn,
    pub maxwellian_jac: IndexedMatFn,
    /// `B(u)` and its Jacobian.
    pub b: VecFnU,
    pub b_jac: MatFnU,
    /// `F_j(u)` and its Jacobian.
    pub flux: VecFnDir,
    pub flux_jac: JacFn,
    /// Common eigenvector matrix `H(u)`: `H dM_l H^{-1}` and `H dB H^{-1}` are diagonal.
    pub h_basis: MatFnU,
    pub u_range: (f64, f64),
    pub w_range: (f64, f64),
}

impl KineticBgkSpec {
    /// Scalar instance: `K = d = 1`, `N = N' = 2`, `lambda = -/+ 4`,
    /// `sigma = +/- 1/sqrt 2`, `theta = 1`, `mu = 1/2`, `F = u^2/2`,
    /// `B = 0.2 u + 0.05 u^2` and `M_{1,2} = (u - B)/2 -/+ F/8`.
    pub fn scalar_default() -> Self {
        const LAMBDA0: f64 = 4.0;
        let b = |u: f64| 0.2 * u + 0.05 * u * u;
        let db = |u: f64| 0.2 + 0.1 * u;
        Self {
            k: 1,
            d: 1,
            lambda: vec![vec![-LAMBDA0], vec![LAMBDA0]],
            sigma: vec![vec![SIGMA_1D[0]], vec![SIGMA_1D[1]]],
            theta: 1.0,
            mu: 0.5,
            maxwellian: Arc::new(move |u, l| {
                let sign = if l == 0 { -1.0 } else { 1.0 };
                let x = u[0];
                DVector::from_element(1, 0.5 * (x - b(x)) + sign * 0.5 * x * x / (2.0 * LAMBDA0))
            }),
            maxwellian_jac: Arc::new(move |u, l| {
                let sign = if l == 0 { -1.0 } else { 1.0 };
                let x = u[0];
                DMatrix::from_element(1, 1, 0.5 * (1.0 - db(x)) + sign * x / (2.0 * LAMBDA0))
            }),
            b: Arc::new(move |u| DVector::from_element(1, b(u[0]))),
            b_jac: Arc::new(move |u| DMatrix::from_element(1, 1, db(u[0]))),
            flux: Arc::new(|u, _| DVector::from_element(1, 0.5 * u[0] * u[0])),
            flux_jac: Arc::new(|u, _| DMatrix::from_element(1, 1, u[0])),
            h_basis: Arc::new(|_| DMatrix::identity(1, 1)),
            u_range: (0.1, 2.0),
            w_range: (-0.5, 0.5),
        }
    }

    fn n_vel(&self) -> usize {
        self.lambda.len()
    }

    fn n_sig(&self) -> usize {
        self.sigma.len()
    }
}

pub struct KineticBgk {
    spec: KineticBgkSpec,
    dims: ModelDims,
    state_box: StateBox,
}

impl KineticBgk {
    /// `theta sqrt(N')`.
    fn speed(&self) -> f64 {
        self.spec.theta * (self.spec.n_sig() as f64).sqrt()
    }

    /// `dB / (N' theta^2)`.
    fn scaled_b_jac(&self, u: &DVector<f64>) -> DMatrix<f64> {
        (self.spec.b_jac)(u) / (self.spec.n_sig() as f64 * self.spec.theta * self.spec.theta)
    }

    /// Jacobian block `dU/df` for each of the `N + N'` distribution indices,
    /// in the order `(dM_1, ..., dM_N, dB/(N' theta^2), ...)`.
    fn equilibrium_jacobians(&self, u: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = (0..self.spec.n_vel()).map(|l| (self.spec.maxwellian_jac)(u, l)).collect();
        let sb = self.scaled_b_jac(u);
        out.extend(std::iter::repeat_n(sb, self.spec.n_sig()));
        out
    }

    /// The transformation matrix `P = dU/df` at `u`.
    pub fn transformation_matrix(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let k = self.spec.k;
        let total = self.spec.n_vel() + self.spec.n_sig();
        let jacs = self.equilibrium_jacobians(u);
        let eye = DMatrix::<f64>::identity(k, k);
        let mut p = DMatrix::zeros(k * total, k * total);
        for c in 0..total {
            p.view_mut((0, c * k), (k, k)).copy_from(&eye);
        }
        for row in 1..total {
            for c in 0..total {
                let mut blk = -&jacs[row];
                if c == row {
                    blk += &eye;
                }
                p.view_mut((row * k, c * k), (k, k)).copy_from(&blk);
            }
        }
        p
    }

    /// `A~_j(eps)`: the diagonal velocity matrix in the distribution variables.
    pub fn velocity_matrix(&self, eps: f64, dir: usize) -> DMatrix<f64> {
        let k = self.spec.k;
        let gamma = eps * self.spec.mu + self.speed();
        let diag = self
            .spec
            .lambda
            .iter()
            .map(|l| eps * l[dir])
            .chain(self.spec.sigma.iter().map(|s| s[dir] * gamma))
            .flat_map(|v| std::iter::repeat_n(v, k));
        DMatrix::from_diagonal(&DVector::from_iterator(self.dims.n(), diag))
    }

    /// `A~_0 = diag{H^T Lambda_l^{-1} H, H^T Lambda_B^{-1} H, ...}`.
    pub fn distribution_symmetrizer(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let h = (self.spec.h_basis)(u);
        let h_inv = linalg::inverse_or_nan(&h);
        let blocks: Vec<DMatrix<f64>> = self
            .equilibrium_jacobians(u)
            .iter()
            .map(|jac| {
                let lambda = &h * jac * &h_inv;
                let inv_diag = DMatrix::from_diagonal(&lambda.diagonal().map(|x| 1.0 / x));
                h.transpose() * inv_diag * &h
            })
            .collect();
        linalg::block_diag(&blocks)
    }
}

pub fn build_kinetic_bgk(spec: KineticBgkSpec) -> Result<(KineticBgk, TargetPde)> {
    let (k, d, nv, ns) = (spec.k, spec.d, spec.n_vel(), spec.n_sig());
    let fail = |msg: String| Err(Error::Construction(format!("kinetic-bgk: {msg}")));
    if k == 0 || nv == 0 {
        return fail("K and N must be positive".into());
    }
    if ns < d + 1 {
        return fail(format!("N' = {ns} must be at least d + 1 = {}", d + 1));
    }
    if spec.lambda.iter().chain(&spec.sigma).any(|row| row.len() != d) {
        return fail("every lambda and sigma row needs d entries".into());
    }
    if !(spec.theta > 0.0) || !(spec.mu >= 0.0) {
        return fail("requires theta > 0 and mu >= 0".into());
    }
    for i in 0..d {
        let sum: f64 = spec.sigma.iter().map(|s| s[i]).sum();
        if sum.abs() > 1e-12 {
            return fail(format!("sum_m sigma_m{i} = {sum:e} is not zero"));
        }
        for j in 0..d {
            let dot: f64 = spec.sigma.iter().map(|s| s[i] * s[j]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            if (dot - expect).abs() > 1e-12 {
                return fail(format!("sum_m sigma_m{i} sigma_m{j} = {dot} differs from {expect}"));
            }
        }
    }

    let n = k * (nv + ns);
    let dims = ModelDims::new(n, n - k, d)?;
    let state_box = StateBox::uniform(dims, spec.u_range, spec.w_range)?;
    let model = KineticBgk { spec, dims, state_box };
    let spec = &model.spec;

    let mut rng = ChaCha8Rng::seed_from_u64(CONSTRUCTION_SEED);
    for _ in 0..CONSTRUCTION_SAMPLES {
        let u = sample_uniform(&mut rng, k, spec.u_range);
        let scale = 1.0 + u.amax();
        // moment constraints
        let ms: Vec<DVector<f64>> = (0..nv).map(|l| (spec.maxwellian)(&u, l)).collect();
        let b = (spec.b)(&u);
        let zeroth = ms.iter().fold(DVector::zeros(k), |acc, m| acc + m);
        let residual = (zeroth - (&u - &b / (spec.theta * spec.theta))).amax();
        if residual > MAXWELLIAN_TOLERANCE * scale {
            return fail(format!("sum_l M_l(u) misses u - B/theta^2 by {residual:e}"));
        }
        for j in 0..d {
            let first = ms
                .iter()
                .zip(&spec.lambda)
                .fold(DVector::zeros(k), |acc, (m, l)| acc + m * l[j]);
            let residual = (first - (spec.flux)(&u, j)).amax();
            if residual > MAXWELLIAN_TOLERANCE * scale {
                return fail(format!("sum_l lambda_l{j} M_l(u) misses F_{j} by {residual:e}"));
            }
        }
        // common eigenbasis with positive eigenvalues
        let h = (spec.h_basis)(&u);
        let h_inv = linalg::checked_inverse(&h, "kinetic-bgk H").map_err(|e| Error::Construction(e.to_string()))?;
        let check_diag = |what: &str, m: DMatrix<f64>| -> Result<()> {
            let lam = &h * m * &h_inv;
            let off = (&lam - DMatrix::from_diagonal(&lam.diagonal())).amax();
            if off > 1e-8 * (1.0 + lam.amax()) {
                return Err(Error::Construction(format!("kinetic-bgk: H does not diagonalize {what}")));
            }
            if lam.diagonal().iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Construction(format!(
                    "kinetic-bgk: {what} has a nonpositive eigenvalue at u = {}",
                    u[0]
                )));
            }
            Ok(())
        };
        for l in 0..nv {
            check_diag(&format!("dM_{}", l + 1), (spec.maxwellian_jac)(&u, l))?;
        }
        check_diag("dB", (spec.b_jac)(&u))?;
        linalg::checked_inverse(&model.transformation_matrix(&u), "kinetic-bgk P")
            .map_err(|e| Error::Construction(e.to_string()))?;
    }

    let flux_jac = spec.flux_jac.clone();
    let b_jac = spec.b_jac.clone();
    let target = TargetPde::new(
        k,
        d,
        Arc::new(move |u, j| flux_jac(u, j)),
        Arc::new(move |u, j, kk| if j == kk { b_jac(u) } else { DMatrix::zeros(u.len(), u.len()) }),
    );
    Ok((model, target))
}

impl RelaxModel for KineticBgk {
    fn name(&self) -> &str {
        "kinetic-bgk"
    }

    fn dims(&self) -> ModelDims {
        self.dims
    }

    fn flux_matrix(&self, state: &StateVec, eps: f64, dir: usize) -> DMatrix<f64> {
        let p = self.transformation_matrix(&state.u());
        let p_inv = linalg::inverse_or_nan(&p);
        p * self.velocity_matrix(eps, dir) * p_inv
    }

    fn source(&self, state: &StateVec, _eps: f64) -> DVector<f64> {
        let mut q = -state.entries().clone();
        q.rows_mut(0, self.dims.m()).fill(0.0);
        q
    }

    fn symmetrizer(&self, state: &StateVec, _eps: f64) -> DMatrix<f64> {
        let p_inv = linalg::inverse_or_nan(&self.transformation_matrix(&state.u()));
        p_inv.transpose() * self.distribution_symmetrizer(&state.u()) * p_inv
    }

    fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    fn eps_max(&self) -> f64 {
        1.0
    }

    /// `eps F_j(u) + sum_{l>=2} eps (lambda_lj - lambda_1j) g_l
    ///  + sum_i ((eps mu + theta sqrt N') sigma_ij - eps lambda_1j) g_{N+i}`.
    fn conserved_flux(&self, state: &StateVec, eps: f64, dir: usize) -> DVector<f64> {
        let k = self.spec.k;
        let u = state.u();
        let w = state.w();
        let lam1 = self.spec.lambda[0][dir];
        let gamma = eps * self.spec.mu + self.speed();
        let mut flux = (self.spec.flux)(&u, dir) * eps;
        let coeffs = self.spec.lambda[1..]
            .iter()
            .map(|l| eps * (l[dir] - lam1))
            .chain(self.spec.sigma.iter().map(|s| gamma * s[dir] - eps * lam1));
        for (i, c) in coeffs.enumerate() {
            flux += w.rows(i * k, k) * c;
        }
        flux
    }

    fn affine_relaxation(&self, _u: &DVector<f64>, _eps: f64) -> Option<AffineRelaxation> {
        let r = self.dims.r();
        Some(AffineRelaxation {
            rates: DVector::from_element(r, 1.0),
            offset: DVector::zeros(r),
        })
    }

    fn spectral_radius(&self, _state: &StateVec, eps: f64, dir: usize) -> f64 {
        // A_j is similar to the diagonal velocity matrix
        self.velocity_matrix(eps, dir).diagonal().amax()
    }

    fn expected_a11(&self, state: &StateVec, eps: f64, dir: usize) -> Option<DMatrix<f64>> {
        Some((self.spec.flux_jac)(&state.u(), dir) * eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_model() -> KineticBgk {
        build_kinetic_bgk(KineticBgkSpec::scalar_default()).unwrap().0
    }

    #[test]
    fn maxwellian_moments_exact_for_default() {
        let spec = KineticBgkSpec::scalar_default();
        for &x in &[0.1, 0.7, 1.3, 2.0] {
            let u = DVector::from_element(1, x);
            let m1 = (spec.maxwellian)(&u, 0)[0];
            let m2 = (spec.maxwellian)(&u, 1)[0];
            let b = (spec.b)(&u)[0];
            assert!((m1 + m2 - (x - b)).abs() < 1e-15);
            assert!((-4.0 * m1 + 4.0 * m2 - 0.5 * x * x).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma_relations_for_default() {
        let spec = KineticBgkSpec::scalar_default();
        let s: Vec<f64> = spec.sigma.iter().map(|r| r[0]).collect();
        assert!((s[0] + s[1]).abs() < 1e-15);
        assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_determinant_and_similarity() {
        let m = default_model();
        for &x in &[0.2, 1.0, 1.8] {
            let u = DVector::from_element(1, x);
            let p = m.transformation_matrix(&u);
            assert!((p.determinant() - 1.0).abs() < 1e-12);
            let s = StateVec::from_slice(m.dims(), &[x, 0.1, -0.2, 0.05]).unwrap();
            let lhs = m.flux_matrix(&s, 0.3, 0) * &p;
            let rhs = &p * m.velocity_matrix(0.3, 0);
            assert!((lhs - rhs).amax() < 1e-12);
        }
    }

    #[test]
    fn conserved_flux_matches_first_row() {
        let m = default_model();
        let s = StateVec::from_slice(m.dims(), &[1.1, 0.1, -0.2, 0.05]).unwrap();
        let eps = 0.2;
        let f0 = m.conserved_flux(&s, eps, 0);
        let row = m.flux_matrix(&s, eps, 0).row(0).into_owned();
        for i in 0..4 {
            let h = 1e-6;
            let fd = (m.conserved_flux(&s.shifted(i, h), eps, 0)[0] - m.conserved_flux(&s.shifted(i, -h), eps, 0)[0]) / (2.0 * h);
            assert!((fd - row[i]).abs() < 1e-8, "column {i}: {fd} vs {}", row[i]);
        }
        assert!(f0[0].is_finite());
    }

    #[test]
    fn non_monotone_maxwellian_rejected() {
        let mut spec = KineticBgkSpec::scalar_default();
        spec.u_range = (0.1, 3.0);
        assert!(matches!(build_kinetic_bgk(spec), Err(Error::Construction(_))));
    }

    #[test]
    fn sigma_must_sum_to_zero() {
        let mut spec = KineticBgkSpec::scalar_default();
        spec.sigma = vec![vec![1.0], vec![0.0]];
        assert!(matches!(build_kinetic_bgk(spec), Err(Error::Construction(_))));
    }
}
