//! Hand-built adversarial models, one per condition, each violating exactly
//! that condition while satisfying the others.
//!
//! All controls share the layout `n = 2, r = 1, d = 1`, the symmetrizer
//! `A_0 = I` and, unless stated otherwise, `A = [[0, 1], [1, 0]]` and
//! `Q = (0, -w)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::Condition;
use crate::model::{
    CallbackModel, FluxCallback, ModelDims, SourceCallback, StateBox, SymmetrizerCallback,
};

/// An adversarial model together with the condition it is built to violate.
#[derive(Clone)]
pub struct NegativeControl {
    pub violates: Condition,
    pub description: &'static str,
    pub model: CallbackModel,
}

fn dims() -> ModelDims {
    ModelDims::new(2, 1, 1).expect("valid control dimensions")
}

fn flux(a: [f64; 4]) -> FluxCallback {
    Arc::new(move |_, _, _| DMatrix::from_row_slice(2, 2, &a))
}

fn source(q: fn(f64, f64) -> [f64; 2]) -> SourceCallback {
    Arc::new(move |s, _| {
        let e = s.entries();
        DVector::from_column_slice(&q(e[0], e[1]))
    })
}

fn identity() -> SymmetrizerCallback {
    Arc::new(|_, _| DMatrix::identity(2, 2))
}

const WAVE: [f64; 4] = [0.0, 1.0, 1.0, 0.0];

fn control(
    violates: Condition,
    description: &'static str,
    flux_cb: FluxCallback,
    source_cb: SourceCallback,
    w_range: (f64, f64),
) -> NegativeControl {
    let state_box = StateBox::from_ranges(&[(0.1, 2.0)], &[w_range]).expect("valid control box");
    let model = CallbackModel::new(
        format!("control-{violates}"),
        dims(),
        flux_cb,
        source_cb,
        identity(),
        state_box,
        1.0,
    )
    .expect("valid control model");
    NegativeControl {
        violates,
        description,
        model,
    }
}

/// The five controls, in condition order.
pub fn negative_controls() -> Vec<NegativeControl> {
    vec![
        control(
            Condition::I,
            "Q = (w^2, -w): conserved equation has a source away from equilibrium",
            flux(WAVE),
            source(|_, w| [w * w, -w]),
            (-0.5, 0.5),
        ),
        control(
            Condition::Ii,
            "q = -w + w^3 on w in [-1.5, 1.5]: spurious equilibria at w = +-1",
            flux(WAVE),
            source(|_, w| [0.0, -w + w * w * w]),
            (-1.5, 1.5),
        ),
        control(
            Condition::Iii,
            "A = [[0, 1], [2, 0]] with A_0 = I: A_0 A is not symmetric",
            flux([0.0, 1.0, 2.0, 0.0]),
            source(|_, w| [0.0, -w]),
            (-0.5, 0.5),
        ),
        control(
            Condition::Iv,
            "q = +w: the relaxation is anti-dissipative",
            flux(WAVE),
            source(|_, w| [0.0, w]),
            (-0.5, 0.5),
        ),
        control(
            Condition::V,
            "A = [[u, 1], [1, 0]]: A^11 does not vanish at equilibrium",
            Arc::new(|s, _, _| DMatrix::from_row_slice(2, 2, &[s.entries()[0], 1.0, 1.0, 0.0])),
            source(|_, w| [0.0, -w]),
            (-0.5, 0.5),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{check_all, check_condition_ii, SamplePlan, Tolerances, DEFAULT_SEED};
    use crate::model::RelaxModel;

    #[test]
    fn each_control_fails_exactly_its_condition() {
        for c in negative_controls() {
            let plan = SamplePlan::for_model(&c.model, 32, DEFAULT_SEED).unwrap();
            let report = check_all(&c.model, &plan, &Tolerances::default());
            assert_eq!(report.failed(), vec![c.violates], "{}: {report:#?}", c.description);
            let res = report.get(c.violates).unwrap();
            assert!(res.witness_state.is_some() && res.witness_eps.is_some());
        }
    }

    #[test]
    fn cubic_source_has_singular_jacobian() {
        let model = CallbackModel::new(
            "cubic",
            dims(),
            flux(WAVE),
            source(|_, w| [0.0, -w * w * w]),
            identity(),
            StateBox::from_ranges(&[(0.1, 2.0)], &[(-0.5, 0.5)]).unwrap(),
            1.0,
        )
        .unwrap();
        let plan = SamplePlan::for_model(&model, 8, 1).unwrap();
        let res = check_condition_ii(&model, &plan, &Tolerances::default());
        assert!(!res.passed());
        assert!(res.detail.contains("worst sub-check (b)"), "{}", res.detail);
        assert_eq!(model.dims().r(), 1);
    }
}
