//! Hand-derived values for the model constructors, the Jacobian helpers and
//! the limit-equation extractor.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use relaxlab_core::criteria::{
    check_condition_ii, first_corrector, limit_residual_compare, LimitTerms, SamplePlan, Tolerances,
};
use relaxlab_core::model::{jac_flux_block, jac_source_wrt_eps, jac_source_wrt_state, Block, JacobianConfig, Wrt};
use relaxlab_core::models::{
    build_cde1d, build_kinetic_bgk, build_lbe_d2q5, build_nldiff, build_viscous_cons, lbe_equilibrium,
    lbe_transformation_matrix, Cde1dSpec, KineticBgkSpec, LbeD2q5Spec, NlDiffSpec, ViscousConsSpec, LBE_VELOCITIES,
    LBE_WEIGHTS,
};
use relaxlab_core::{RelaxModel, StateVec};

fn assert_matrix(actual: &DMatrix<f64>, expected: &DMatrix<f64>, tol: f64) {
    assert_eq!(actual.shape(), expected.shape());
    let diff = (actual - expected).amax();
    assert!(diff <= tol, "got {actual}expected {expected}difference {diff:e}");
}

fn state(model: &dyn RelaxModel, entries: &[f64]) -> StateVec {
    StateVec::from_slice(model.dims(), entries).unwrap()
}

fn cde(f: fn(f64) -> f64, df: fn(f64) -> f64, b: fn(f64) -> f64, db: fn(f64) -> f64, range: (f64, f64)) -> Cde1dSpec {
    Cde1dSpec {
        f: Arc::new(f),
        df: Arc::new(df),
        b: Arc::new(b),
        db: Arc::new(db),
        u_range: range,
        w_range: (-0.5, 0.5),
    }
}

#[test]
fn cde_source_jacobians() {
    let cfg = JacobianConfig::default();
    let (heat, _) = build_cde1d(Cde1dSpec::linear_heat()).unwrap();
    let jac = jac_source_wrt_state(&heat, &state(&heat, &[1.0, 0.0]), 0.0, &cfg).unwrap();
    assert_matrix(&jac, &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]), 1e-9);
    let de = jac_source_wrt_eps(&heat, &state(&heat, &[1.7, 0.2]), &cfg).unwrap();
    assert!(de.amax() < 1e-12);

    let (burgers_flux, _) = build_cde1d(cde(|u| 0.5 * u * u, |u| u, |u| u, |_| 1.0, (0.1, 2.5))).unwrap();
    let jac = jac_source_wrt_state(&burgers_flux, &state(&burgers_flux, &[2.0, 0.0]), 1.0, &cfg).unwrap();
    assert_matrix(&jac, &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, -1.0]), 1e-7);

    let (linear_flux, _) = build_cde1d(cde(|u| u, |_| 1.0, |u| u, |_| 1.0, (0.1, 3.5))).unwrap();
    let de = jac_source_wrt_eps(&linear_flux, &state(&linear_flux, &[3.0, 0.0]), &cfg).unwrap();
    assert!((de[0]).abs() < 1e-12 && (de[1] - 3.0).abs() < 1e-7, "{de}");
}

#[test]
fn cde_flux_block_and_symmetrizer() {
    let cfg = JacobianConfig::default();
    let (m, _) = build_cde1d(Cde1dSpec::burgers()).unwrap();
    for u in [0.3, 1.0, 1.8] {
        let s = state(&m, &[u, 0.0]);
        let a = m.flux_matrix(&s, 0.0, 0);
        assert!((Block::B21.extract(&a, 1, 1)[(0, 0)] - u).abs() < 1e-14);
        let da = jac_flux_block(&m, &s, 0.0, 0, Block::B21, Wrt::U, &cfg).unwrap();
        assert!((da[0][(0, 0)] - 1.0).abs() < 1e-7);
    }

    let (sq, _) = build_cde1d(cde(|u| u, |_| 1.0, |u| u * u, |u| 2.0 * u, (0.5, 1.5))).unwrap();
    let a0 = sq.symmetrizer(&state(&sq, &[1.0, 0.0]), 0.1);
    assert_matrix(&a0, &DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]), 1e-14);

    let (half, _) = build_cde1d(cde(|u| u, |_| 1.0, |u| 0.5 * u * u, |u| u, (0.5, 1.5))).unwrap();
    assert!((half.eps_max() - 0.9 * 0.5_f64.sqrt()).abs() < 1e-12, "{}", half.eps_max());
}

#[test]
fn viscous_scalar_symmetrizer() {
    let nu = 0.5;
    let (m, _) = build_viscous_cons(ViscousConsSpec::scalar_burgers(nu)).unwrap();
    for eps in [0.0, 0.1, 0.4] {
        let a0 = m.symmetrizer(&state(&m, &[1.0, 0.0]), eps);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0 / (nu + eps * eps)]));
        assert_matrix(&a0, &expected, 1e-12);
    }
}

#[test]
fn nldiff_linear_symmetrizer_and_dissipation() {
    let (m, _) = build_nldiff(NlDiffSpec::linear(1)).unwrap();
    let s = state(&m, &[1.0, 0.0, 0.0]);
    let a0 = m.symmetrizer(&s, 0.0);
    assert_matrix(&a0, &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0 / 3.0])), 1e-12);
    let jac = jac_source_wrt_state(&m, &s, 0.0, &JacobianConfig::default()).unwrap();
    let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0, -1.0 / 3.0]));
    assert_matrix(&(a0 * jac), &expected, 1e-8);
}

#[test]
fn nldiff_cubic_limit_diffusion() {
    let (m, _) = build_nldiff(NlDiffSpec::cubic(1)).unwrap();
    let terms = LimitTerms::at(&m, &DVector::from_element(1, 1.0)).unwrap();
    assert!((terms.diffusion(0, 0)[(0, 0)] - 3.0).abs() < 1e-6, "{}", terms.diffusion(0, 0));
}

#[test]
fn lbe_moments_and_transformation() {
    assert!((LBE_WEIGHTS.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    let g = lbe_equilibrium(0.7, 0.1, [1.0, 0.0]);
    assert!((g.iter().sum::<f64>() - 0.7).abs() < 1e-15);
    for (dir, expected) in [(0, 0.1), (1, 0.0)] {
        let first: f64 = g.iter().zip(LBE_VELOCITIES.iter()).map(|(gi, xi)| gi * xi[dir]).sum();
        assert!((first - expected).abs() < 1e-15, "direction {dir}: {first}");
    }
    assert!((lbe_transformation_matrix().determinant() - 1.0).abs() < 1e-12);
}

#[test]
fn lbe_source_eps_derivative_and_corrector() {
    let (m, _) = build_lbe_d2q5(LbeD2q5Spec::linear(1.0, 0.0, 0.2)).unwrap();
    let tau = 3.0 * 0.2;
    let de = jac_source_wrt_eps(&m, &state(&m, &[1.0, 0.0, 0.0, 0.0, 0.0]), &JacobianConfig::default()).unwrap();
    let w1 = first_corrector(&m, &DVector::from_element(1, 1.0), &[DVector::zeros(1), DVector::zeros(1)]).unwrap();
    assert_eq!(de[0], 0.0);
    for i in 1..5 {
        let xf = LBE_VELOCITIES[i][0];
        assert!((de[i] - 3.0 * LBE_WEIGHTS[i] * xf / tau).abs() < 1e-7, "entry {i}: {}", de[i]);
        assert!((w1[i - 1] - 3.0 * LBE_WEIGHTS[i] * xf).abs() < 1e-6, "entry {i}: {}", w1[i - 1]);
    }
}

#[test]
fn cde_first_corrector() {
    let (m, _) = build_cde1d(Cde1dSpec::linear_heat()).unwrap();
    let u = DVector::from_element(1, 1.2);
    for g in [-0.7, 0.0, 2.5] {
        let w1 = first_corrector(&m, &u, &[DVector::from_element(1, g)]).unwrap();
        assert!((w1[0] + g).abs() < 1e-9, "g = {g}: {}", w1[0]);
    }
}

#[test]
fn kinetic_transformation_and_relaxation() {
    let (m, _) = build_kinetic_bgk(KineticBgkSpec::scalar_default()).unwrap();
    for u in [0.5, 1.0, 1.5] {
        assert!((m.transformation_matrix(&DVector::from_element(1, u)).determinant() - 1.0).abs() < 1e-12);
    }
    let plan = SamplePlan::for_model(&m, 16, 3).unwrap();
    assert!(check_condition_ii(&m, &plan, &Tolerances::default()).passed());
}

#[test]
fn limit_comparison_examples() {
    let (heat, target) = build_nldiff(NlDiffSpec::linear(1)).unwrap();
    let field = |x: &[f64]| DVector::from_element(1, 1.0 + 0.5 * x[0].sin());
    let cmp = limit_residual_compare(&heat, &target, &field, 0.01).unwrap();
    assert!(cmp.residual_mismatch <= 1e-8, "{}", cmp.residual_mismatch);

    let (burgers, target) = build_cde1d(Cde1dSpec::burgers()).unwrap();
    let field = |x: &[f64]| DVector::from_element(1, 1.5 + 0.5 * x[0].sin());
    let cmp = limit_residual_compare(&burgers, &target, &field, 0.005).unwrap();
    assert!(cmp.residual_mismatch <= 1e-5, "{}", cmp.residual_mismatch);

    let mut spec = LbeD2q5Spec::linear(0.5, 0.25, 0.2);
    spec.tau_scale = 1.5;
    let (lbe, target) = build_lbe_d2q5(spec).unwrap();
    let field = |x: &[f64]| DVector::from_element(1, 1.0 + 0.25 * (x[0].sin() + x[1].cos()));
    let cmp = limit_residual_compare(&lbe, &target, &field, 0.01).unwrap();
    assert!(cmp.residual_mismatch > 1e-2, "{}", cmp.residual_mismatch);
}
