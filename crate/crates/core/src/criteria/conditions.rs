//! Sampled checks of conditions (i)-(v).
//!
//! Each condition is a list of sub-checks. Every sample produces one metric per
//! sub-check; a sub-check either bounds its metric from above (`AtMost`) or from
//! below (`Above`). The reported metric is the one closest to (or furthest past)
//! its bound over all samples and sub-checks, so a passing report shows the
//! margin and a failing one shows the worst offender.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{Condition, ConditionResult, CriteriaReport, SamplePlan, Tolerances, Verdict, SCHEMA_VERSION};
use crate::error::Result;
use crate::linalg;
use crate::model::{
    jac_flux_block, jac_source_wrt_state, Block, JacobianConfig, RelaxModel, StateVec, Wrt,
};

/// Below this magnitude a matrix is treated as exactly zero when normalizing.
const SCALE_FLOOR: f64 = 1e-300;

/// Points per axis of the coarse `w` scan of condition (ii)(c).
const SCAN_POINTS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    AtMost,
    Above,
}

#[derive(Debug, Clone, Copy)]
struct Sub {
    name: &'static str,
    cmp: Cmp,
    tol: f64,
}

impl Sub {
    const fn at_most(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            cmp: Cmp::AtMost,
            tol,
        }
    }

    const fn above(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            cmp: Cmp::Above,
            tol,
        }
    }

    /// `<= 1` means the sample satisfies the sub-check.
    fn severity(&self, metric: f64) -> f64 {
        if metric.is_nan() {
            return f64::INFINITY;
        }
        match self.cmp {
            Cmp::AtMost => {
                if metric == 0.0 {
                    0.0
                } else {
                    metric / self.tol
                }
            }
            Cmp::Above => {
                if metric <= 0.0 {
                    f64::INFINITY
                } else {
                    self.tol / metric
                }
            }
        }
    }

    fn satisfied(&self, metric: f64) -> bool {
        match self.cmp {
            Cmp::AtMost => metric <= self.tol,
            Cmp::Above => metric > self.tol,
        }
    }
}

/// Output of one sample: a metric per sub-check and an optional matrix to report.
struct SampleEval {
    metrics: Vec<f64>,
    matrix: Option<DMatrix<f64>>,
}

struct Worst {
    sub: usize,
    severity: f64,
    metric: f64,
    state: DVector<f64>,
    eps: f64,
    matrix: Option<DMatrix<f64>>,
    error: Option<String>,
}

/// Evaluates `eval` on every `(state, eps)` pair and reduces in sample order.
fn run_condition<F>(
    model: &dyn RelaxModel,
    condition: Condition,
    subs: &[Sub],
    pairs: &[(DVector<f64>, f64)],
    eval: F,
) -> ConditionResult
where
    F: Fn(&StateVec, f64) -> Result<SampleEval> + Sync,
{
    let dims = model.dims();
    let outcomes: Vec<Result<SampleEval>> = pairs
        .par_iter()
        .map(|(entries, eps)| {
            let state = StateVec::new(dims, entries.clone())?;
            eval(&state, *eps)
        })
        .collect();

    let mut worst: Option<Worst> = None;
    let mut per_sub = vec![(f64::NEG_INFINITY, f64::NAN); subs.len()];
    let mut any_fail = false;
    for ((entries, eps), outcome) in pairs.iter().zip(outcomes) {
        let candidate = match outcome {
            Ok(sample) => {
                let mut best: Option<Worst> = None;
                for (i, (sub, &metric)) in subs.iter().zip(&sample.metrics).enumerate() {
                    let sev = sub.severity(metric);
                    any_fail |= !sub.satisfied(metric);
                    if sev > per_sub[i].0 || per_sub[i].1.is_nan() {
                        per_sub[i] = (sev, metric);
                    }
                    if best.as_ref().is_none_or(|b| sev > b.severity) {
                        best = Some(Worst {
                            sub: i,
                            severity: sev,
                            metric,
                            state: entries.clone(),
                            eps: *eps,
                            matrix: sample.matrix.clone(),
                            error: None,
                        });
                    }
                }
                best
            }
            Err(e) => {
                any_fail = true;
                Some(Worst {
                    sub: 0,
                    severity: f64::INFINITY,
                    metric: f64::MAX,
                    state: entries.clone(),
                    eps: *eps,
                    matrix: None,
                    error: Some(e.to_string()),
                })
            }
        };
        if let Some(c) = candidate {
            // strict comparison keeps the earliest sample on ties
            if worst.as_ref().is_none_or(|w| c.severity > w.severity) {
                worst = Some(c);
            }
        }
    }

    let summary: Vec<String> = subs
        .iter()
        .zip(&per_sub)
        .map(|(s, (_, m))| {
            let op = if s.cmp == Cmp::AtMost { "<=" } else { ">" };
            format!("{}: worst {:.3e} (need {op} {:.1e})", s.name, m, s.tol)
        })
        .collect();
    let verdict = if any_fail { Verdict::Fail } else { Verdict::Pass };

    match worst {
        None => ConditionResult {
            model: model.name().to_string(),
            condition,
            verdict: Verdict::Fail,
            witness_state: None,
            witness_eps: None,
            metric: f64::MAX,
            tolerance: subs.first().map_or(0.0, |s| s.tol),
            detail: "no samples evaluated".into(),
            dissipation_matrix: None,
        },
        Some(w) => {
            let sub = subs[w.sub];
            let mut detail = match &w.error {
                Some(e) => format!("evaluation error: {e}; "),
                None => format!("worst sub-check {}; ", sub.name),
            };
            detail.push_str(&summary.join("; "));
            ConditionResult {
                model: model.name().to_string(),
                condition,
                verdict,
                witness_state: Some(w.state.iter().copied().collect()),
                witness_eps: Some(w.eps),
                metric: w.metric,
                tolerance: sub.tol,
                detail,
                dissipation_matrix: w.matrix.map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect()),
            }
        }
    }
}

fn all_pairs(plan: &SamplePlan) -> Vec<(DVector<f64>, f64)> {
    let states = plan.states();
    plan.eps_values
        .iter()
        .flat_map(|&e| states.iter().map(move |s| (s.clone(), e)))
        .collect()
}

/// Sampled states projected onto equilibrium `w = 0`, at `eps = 0`.
fn equilibrium_pairs(model: &dyn RelaxModel, plan: &SamplePlan) -> Vec<(DVector<f64>, f64)> {
    let m = model.dims().m();
    plan.states()
        .into_iter()
        .map(|mut s| {
            s.rows_mut(m, s.len() - m).fill(0.0);
            (s, 0.0)
        })
        .collect()
}

fn scale(x: f64) -> f64 {
    x.max(1.0)
}

/// (i): the first `m` entries of `Q` vanish identically.
pub fn check_condition_i(model: &dyn RelaxModel, plan: &SamplePlan, tol: &Tolerances) -> ConditionResult {
    let m = model.dims().m();
    let subs = [Sub::at_most("|Q^I| / max(1, |Q|)", tol.zero_block)];
    run_condition(model, Condition::I, &subs, &all_pairs(plan), |state, eps| {
        crate::model::check_inputs(model, state, eps)?;
        let q = crate::model::finite_vector(model.source(state, eps), "source")?;
        let top = linalg::max_abs_vec(&q.rows(0, m).into_owned());
        Ok(SampleEval {
            metrics: vec![top / scale(linalg::max_abs_vec(&q))],
            matrix: None,
        })
    })
}

/// Coarse `w` scan points for (ii)(c): a grid along each `w` axis of the box
/// (zero excluded) plus the sampled `w` and two halvings of it.
fn scan_points(model: &dyn RelaxModel, sampled_w: &DVector<f64>) -> Vec<DVector<f64>> {
    let dims = model.dims();
    let (m, r) = (dims.m(), dims.r());
    let mut pts = Vec::new();
    for i in 0..r {
        for v in model.state_box().grid(m + i, SCAN_POINTS) {
            if v != 0.0 {
                let mut w = DVector::zeros(r);
                w[i] = v;
                pts.push(w);
            }
        }
    }
    for k in 0..3 {
        let w = sampled_w / f64::from(1u32 << k);
        if w.iter().any(|x| *x != 0.0) {
            pts.push(w);
        }
    }
    pts
}

/// (ii): `q(u, 0; 0) = 0`, `d_w q(u, 0; 0)` invertible, and `|q(u, w; 0)|`
/// bounded below by a multiple of `|w|` on a coarse scan.
///
/// The "only if" half of the condition cannot be decided by sampling; the scan
/// is a local proxy for it.
pub fn check_condition_ii(model: &dyn RelaxModel, plan: &SamplePlan, tol: &Tolerances) -> ConditionResult {
    let dims = model.dims();
    let (m, r) = (dims.m(), dims.r());
    let cfg = JacobianConfig::default();
    let subs = [
        Sub::at_most("(a) |q(u,0;0)| / max(1, |u|)", tol.equilibrium),
        Sub::above("(b) sigma_min(d_w q) / max(1, sigma_max)", tol.invertibility),
        Sub::above("(c) min |q(u,w;0)| / (sigma_min |w|)", tol.growth),
    ];
    let states = plan.states();
    let pairs: Vec<_> = states.iter().map(|s| (s.clone(), 0.0)).collect();
    run_condition(model, Condition::Ii, &subs, &pairs, |sampled, _| {
        let u = sampled.u();
        let eq = StateVec::equilibrium(dims, &u)?;
        crate::model::check_inputs(model, &eq, 0.0)?;
        let q0 = crate::model::finite_vector(model.source(&eq, 0.0), "source")?;
        let a = linalg::max_abs_vec(&q0.rows(m, r).into_owned()) / scale(linalg::max_abs_vec(&u));

        let jac = jac_source_wrt_state(model, &eq, 0.0, &cfg)?;
        let qw = Block::B22.extract(&jac, m, r);
        let sv = linalg::singular_values(&qw);
        let (smax, smin) = (sv[0], sv[r - 1]);
        let b = smin / scale(smax);

        let mut c = f64::INFINITY;
        for w in scan_points(model, &sampled.w()) {
            let s = StateVec::from_parts(dims, &u, &w)?;
            if !model.state_box().contains(s.entries()) {
                continue;
            }
            let q = crate::model::finite_vector(model.source(&s, 0.0), "source")?;
            let ratio = q.rows(m, r).norm() / (smin.max(SCALE_FLOOR) * w.norm());
            c = c.min(ratio);
        }
        Ok(SampleEval {
            metrics: vec![a, b, c],
            matrix: None,
        })
    })
}

/// (iii): `A_0` symmetric positive definite and `A_0 A_j` symmetric.
pub fn check_condition_iii(model: &dyn RelaxModel, plan: &SamplePlan, tol: &Tolerances) -> ConditionResult {
    let d = model.dims().d();
    let subs = [
        Sub::at_most("|A0 Aj - (A0 Aj)^T| / |A0 Aj|", tol.symmetry),
        Sub::at_most("|A0 - A0^T| / |A0|", tol.symmetry),
        Sub::above("lambda_min(A0) / lambda_max(A0)", tol.eigen_ratio),
    ];
    run_condition(model, Condition::Iii, &subs, &all_pairs(plan), |state, eps| {
        crate::model::check_inputs(model, state, eps)?;
        let a0 = crate::model::finite_matrix(model.symmetrizer(state, eps), "symmetrizer")?;
        let mut defect = 0.0_f64;
        for j in 0..d {
            let aj = crate::model::finite_matrix(model.flux_matrix(state, eps, j), "flux matrix")?;
            let p = &a0 * aj;
            let s = linalg::max_abs(&p);
            if s > SCALE_FLOOR {
                defect = defect.max(linalg::symmetry_defect(&p) / s);
            }
        }
        let a0_scale = linalg::max_abs(&a0).max(SCALE_FLOOR);
        let a0_defect = linalg::symmetry_defect(&a0) / a0_scale;
        let ev = linalg::sym_eigenvalues(&a0);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        let ratio = if hi > 0.0 { lo / hi } else { f64::NEG_INFINITY };
        Ok(SampleEval {
            metrics: vec![defect, a0_defect, ratio],
            matrix: None,
        })
    })
}

/// (iv): with `M = A_0 Q_U + Q_U^T A_0` at `(u, 0; 0)`, the blocks `M^11`,
/// `M^12` vanish and `S = -M^22` is positive definite. This block-diagonal
/// form is sufficient for the condition; the general quadratic-form
/// inequality is not searched.
pub fn check_condition_iv(model: &dyn RelaxModel, plan: &SamplePlan, tol: &Tolerances) -> ConditionResult {
    let dims = model.dims();
    let (m, r) = (dims.m(), dims.r());
    let cfg = JacobianConfig::default();
    let subs = [
        Sub::at_most("|M^11| / |M|", tol.dissipation),
        Sub::at_most("|M^12| / |M|", tol.dissipation),
        Sub::above("lambda_min(S) / lambda_max(S)", tol.dissipation),
    ];
    run_condition(model, Condition::Iv, &subs, &equilibrium_pairs(model, plan), |state, eps| {
        let a0 = crate::model::finite_matrix(model.symmetrizer(state, eps), "symmetrizer")?;
        let jac = jac_source_wrt_state(model, state, eps, &cfg)?;
        let prod = &a0 * &jac;
        let big = &prod + prod.transpose();
        let s_norm = linalg::max_abs(&big).max(SCALE_FLOOR);
        let m11 = linalg::max_abs(&Block::B11.extract(&big, m, r)) / s_norm;
        let m12 = linalg::max_abs(&Block::B12.extract(&big, m, r)) / s_norm;
        let s = -Block::B22.extract(&big, m, r);
        let ev = linalg::sym_eigenvalues(&s);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        let ratio = if hi > 0.0 { lo / hi } else { f64::NEG_INFINITY };
        Ok(SampleEval {
            metrics: vec![m11, m12, ratio],
            matrix: Some(s),
        })
    })
}

/// (v): `A_j^11(u, 0; 0) = 0` and `d_u A_j^11(u, 0; 0) = 0`; for models that
/// declare a closed form of `A_j^11(U; eps)`, that form is checked as well.
pub fn check_condition_v(model: &dyn RelaxModel, plan: &SamplePlan, tol: &Tolerances) -> ConditionResult {
    let dims = model.dims();
    let (m, r, d) = (dims.m(), dims.r(), dims.d());
    let cfg = JacobianConfig::default();
    let subs = [
        Sub::at_most("|A_j^11(u,0;0)| / max(1, |A_j|)", tol.compatibility),
        Sub::at_most("|d_u A_j^11(u,0;0)| / max(1, |A_j|)", tol.compatibility),
        Sub::at_most("|A_j^11(U;eps) - closed form| / max(1, |A_j|)", tol.compatibility),
    ];
    run_condition(model, Condition::V, &subs, &all_pairs(plan), |state, eps| {
        crate::model::check_inputs(model, state, eps)?;
        let eq = StateVec::equilibrium(dims, &state.u())?;
        let (mut zero, mut deriv, mut closed) = (0.0_f64, 0.0_f64, 0.0_f64);
        for j in 0..d {
            let a_eq = crate::model::finite_matrix(model.flux_matrix(&eq, 0.0, j), "flux matrix")?;
            let sc = scale(linalg::max_abs(&a_eq));
            zero = zero.max(linalg::max_abs(&Block::B11.extract(&a_eq, m, r)) / sc);
            for dm in jac_flux_block(model, &eq, 0.0, j, Block::B11, Wrt::U, &cfg)? {
                deriv = deriv.max(linalg::max_abs(&dm) / sc);
            }
            if let Some(expected) = model.expected_a11(state, eps, j) {
                let a = crate::model::finite_matrix(model.flux_matrix(state, eps, j), "flux matrix")?;
                let diff = Block::B11.extract(&a, m, r) - expected;
                closed = closed.max(linalg::max_abs(&diff) / scale(linalg::max_abs(&a)));
            }
        }
        Ok(SampleEval {
            metrics: vec![zero, deriv, closed],
            matrix: None,
        })
    })
}

/// Runs all five checks and collects them into a report.
pub fn check_all(model: &dyn RelaxModel, plan: &SamplePlan, tol: &Tolerances) -> CriteriaReport {
    let results = vec![
        check_condition_i(model, plan, tol),
        check_condition_ii(model, plan, tol),
        check_condition_iii(model, plan, tol),
        check_condition_iv(model, plan, tol),
        check_condition_v(model, plan, tol),
    ];
    CriteriaReport {
        schema_version: SCHEMA_VERSION,
        model: model.name().to_string(),
        samples: plan.count,
        seed: plan.seed,
        eps_values: plan.eps_values.clone(),
        tolerances: *tol,
        results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::DEFAULT_SEED;
    use crate::models::{build_model, ModelOptions};

    fn report(id: &str) -> CriteriaReport {
        let built = build_model(id, ModelOptions::default()).unwrap();
        let plan = SamplePlan::for_model(built.model.as_ref(), 32, DEFAULT_SEED).unwrap();
        check_all(built.model.as_ref(), &plan, &Tolerances::default())
    }

    #[test]
    fn cde1d_passes_everything() {
        let r = report("cde1d");
        assert!(r.all_pass(), "{r:#?}");
        assert_eq!(r.get(Condition::I).unwrap().metric, 0.0);
    }

    #[test]
    fn nldiff_linear_dissipation_matrix() {
        let built = build_model("nldiff:linear", ModelOptions::default()).unwrap();
        let plan = SamplePlan::for_model(built.model.as_ref(), 4, 3).unwrap();
        let res = check_condition_iv(built.model.as_ref(), &plan, &Tolerances::default());
        assert!(res.passed());
        let s = res.dissipation_matrix.unwrap();
        assert!((s[0][0] - 2.0).abs() < 1e-8);
        assert!((s[1][1] - 2.0 / 3.0).abs() < 1e-8);
        assert!(s[0][1].abs() < 1e-8);
    }

    #[test]
    fn cde1d_beyond_subcharacteristic_fails_iii() {
        let built = build_model("cde1d", ModelOptions::default()).unwrap();
        let plan = SamplePlan::with_eps(built.model.as_ref(), 32, DEFAULT_SEED, &[10.0]).unwrap();
        let res = check_condition_iii(built.model.as_ref(), &plan, &Tolerances::default());
        assert_eq!(res.verdict, Verdict::Fail);
        assert_eq!(res.witness_eps, Some(10.0));
        assert!(res.witness_state.is_some());
    }

    #[test]
    fn reports_are_deterministic() {
        let a = report("lbe-d2q5");
        let b = report("lbe-d2q5");
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}
