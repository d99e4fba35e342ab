//! Random instances of the general hyperbolic-parabolic relaxation model and
//! the validator for its structural properties.
//!
//! Instances are parametrized so that assumptions (I)-(III) hold by
//! construction:
//!
//! * `a_0 = G G^T + 0.01 I` with a Gaussian factor `G`;
//! * `a_j(u) = a_0^-1 (S_j + u_1 T_j)` with symmetric Gaussian `S_j`, `T_j`;
//! * an SPD `sd x sd` matrix `S` with `s x s` blocks `S_jk`, and
//!   `D_jk^21 = S_jk a_0^21`, `D_jk^22 = S_jk a_0^22`.
//!
//! Then `[a_0 D_jk] = (I (x) C) S (I (x) C)^T` with `C = [a_0^12; a_0^22]`,
//! `H = S diag{a_0^22, ...}` and `B = S^-1`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{check_all, Condition, SamplePlan, Tolerances, DEFAULT_SAMPLES, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{jac_source_wrt_state, JacobianConfig, RelaxModel, StateVec};
use crate::models::{assemble_general_hp, check_assumptions, GeneralHp, GeneralHpSpec};

const MAX_ATTEMPTS: usize = 10;
const STRUCTURE_TOLERANCE: f64 = 1e-10;
const SYMMETRY_TOLERANCE: f64 = 1e-8;
/// States per instance at which Theorem 4.1 (a)-(c) and the relations are checked.
const THEOREM_SAMPLES: usize = 8;
const VERIFY_SAMPLES: usize = 16;
const U_RANGE: (f64, f64) = (0.1, 2.0);
const W_RANGE: (f64, f64) = (-0.5, 0.5);

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Constant-coefficient data of a generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem4Instance {
    pub seed: u64,
    pub m: usize,
    pub s: usize,
    pub d: usize,
    pub a0: DMatrix<f64>,
    pub s_big: DMatrix<f64>,
    pub adv_const: Vec<DMatrix<f64>>,
    pub adv_linear: Vec<DMatrix<f64>>,
}

#[derive(Serialize)]
struct InstanceWitness {
    seed: u64,
    m: usize,
    s: usize,
    d: usize,
    a0: Vec<Vec<f64>>,
    s_big: Vec<Vec<f64>>,
    adv_const: Vec<Vec<Vec<f64>>>,
    adv_linear: Vec<Vec<Vec<f64>>>,
}

impl Serialize for Theorem4Instance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        InstanceWitness {
            seed: self.seed,
            m: self.m,
            s: self.s,
            d: self.d,
            a0: rows(&self.a0),
            s_big: rows(&self.s_big),
            adv_const: self.adv_const.iter().map(rows).collect(),
            adv_linear: self.adv_linear.iter().map(rows).collect(),
        }
        .serialize(serializer)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn sym_gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    linalg::symmetrize(&gaussian(rng, n, n)) * scale
}

impl Theorem4Instance {
    fn draw(seed: u64, m: usize, s: usize, d: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian(&mut rng, m, m);
        let a0 = &g * g.transpose() + DMatrix::identity(m, m) * 0.01;
        let adv_const = (0..d).map(|_| sym_gaussian(&mut rng, m, 0.5)).collect();
        let adv_linear = (0..d).map(|_| sym_gaussian(&mut rng, m, 0.25)).collect();
        let k = gaussian(&mut rng, s * d, s * d);
        let s_big = &k * k.transpose() / (s * d) as f64 + DMatrix::identity(s * d, s * d) * 0.1;
        Self {
            seed,
            m,
            s,
            d,
            a0,
            s_big,
            adv_const,
            adv_linear,
        }
    }

    /// The general-hp specification of this instance.
    pub fn spec(&self) -> GeneralHpSpec {
        let (m, s) = (self.m, self.s);
        let m1 = m - s;
        let a0 = self.a0.clone();
        let a0_inv = linalg::inverse_or_nan(&a0);
        let (c, l) = (self.adv_const.clone(), self.adv_linear.clone());
        let a21 = a0.view((m1, 0), (s, m1)).into_owned();
        let a22 = a0.view((m1, m1), (s, s)).into_owned();
        let block = move |sb: &DMatrix<f64>, j: usize, k: usize| sb.view((j * s, k * s), (s, s)).into_owned();
        let (sb21, sb22) = (self.s_big.clone(), self.s_big.clone());
        GeneralHpSpec {
            m,
            s,
            d: self.d,
            advection: Arc::new(move |u: &DVector<f64>, j| &a0_inv * (&c[j] + &l[j] * u[0])),
            d21: Arc::new(move |_, j, k| block(&sb21, j, k) * &a21),
            d22: Arc::new(move |_, j, k| block(&sb22, j, k) * &a22),
            a0: Arc::new(move |_| a0.clone()),
            u_range: U_RANGE,
            w_range: W_RANGE,
        }
    }

    /// Draws an instance and re-verifies (I)-(III) on sampled states, retrying
    /// with derived seeds up to ten times.
    pub fn generate(seed: u64, m: usize, s: usize, d: usize) -> Result<Self> {
        if s == 0 || s > m {
            return Err(Error::Config(format!("need 1 <= s <= m, got (m, s) = ({m}, {s})")));
        }
        if !(1..=3).contains(&d) {
            return Err(Error::Config(format!("space dimension must be 1, 2 or 3, got {d}")));
        }
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            let inst = Self::draw(seed.wrapping_add((attempt as u64) << 32), m, s, d);
            match inst.verify() {
                Ok(()) => return Ok(inst),
                Err(msg) => last = msg,
            }
        }
        Err(Error::GeneratorExhausted {
            attempts: MAX_ATTEMPTS,
            reason: last,
        })
    }

    fn verify(&self) -> std::result::Result<(), String> {
        let spec = self.spec();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9);
        for _ in 0..VERIFY_SAMPLES {
            let u = crate::models::sample_uniform(&mut rng, self.m, U_RANGE);
            check_assumptions(&spec, &u)?;
        }
        Ok(())
    }
}

/// A random general-hp specification satisfying assumptions (I)-(III).
pub fn gen_theorem4_instance(seed: u64, m: usize, s: usize, d: usize) -> Result<GeneralHpSpec> {
    Ok(Theorem4Instance::generate(seed, m, s, d)?.spec())
}

/// The negative control: `S` replaced by `-S`, which breaks (II) and makes `B`
/// negative definite.
pub fn mutate_flip_sign(inst: &Theorem4Instance) -> Theorem4Instance {
    Theorem4Instance {
        s_big: -&inst.s_big,
        ..inst.clone()
    }
}

/// Relative residuals of `B [D_jk^21] = diag{(a_0^12)^T, ...}` and
/// `B [D_jk^22] = diag{(a_0^22)^T, ...}` at `u`.
pub fn z10_residuals(spec: &GeneralHpSpec, u: &DVector<f64>) -> (f64, f64) {
    let (m1, s) = (spec.m - spec.s, spec.s);
    let a0 = (spec.a0)(u);
    let b = spec.b_matrix(u);
    let rel = |lhs: DMatrix<f64>, rhs: DMatrix<f64>| {
        if lhs.is_empty() {
            return 0.0;
        }
        linalg::max_abs(&(&lhs - &rhs)) / linalg::max_abs(&rhs).max(1.0)
    };
    let a12t = a0.view((0, m1), (m1, s)).transpose();
    let a22t = a0.view((m1, m1), (s, s)).transpose();
    let za = rel(&b * spec.d21_matrix(u), linalg::block_diag(&vec![a12t; spec.d]));
    let zb = rel(&b * spec.h_matrix(u), linalg::block_diag(&vec![a22t; spec.d]));
    (za, zb)
}

/// Per-instance result.
#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub dims: (usize, usize, usize),
    /// (a): `B` and `A_0` symmetric positive definite.
    pub theorem_a: bool,
    /// (b): `A_0 A-bar_j` and `A_0 A-hat_j` symmetric.
    pub theorem_b: bool,
    /// (c): `A_0 Q_U = diag{0, -B}`, symmetric negative semidefinite.
    pub theorem_c: bool,
    pub failed_conditions: Vec<Condition>,
    pub z10a: f64,
    pub z10b: f64,
    pub passed: bool,
    /// Description of the first failed check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// Full instance data, kept only for failed trials.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Theorem4Instance>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem4Report {
    pub schema_version: u32,
    pub trials: usize,
    pub seed: u64,
    pub dims: Vec<(usize, usize, usize)>,
    pub mutated: bool,
    pub passed: usize,
    pub pass_rate: f64,
    pub max_z10a: f64,
    pub max_z10b: f64,
    pub outcomes: Vec<TrialOutcome>,
}

impl Theorem4Report {
    pub fn all_pass(&self) -> bool {
        self.passed == self.trials
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }
}

fn spd(m: &DMatrix<f64>) -> std::result::Result<(), String> {
    let scale = linalg::max_abs(m).max(f64::MIN_POSITIVE);
    if linalg::symmetry_defect(m) > STRUCTURE_TOLERANCE * scale {
        return Err(format!("not symmetric (defect {:e})", linalg::symmetry_defect(m)));
    }
    let ev = linalg::sym_eigenvalues(m);
    if !(ev[0] > STRUCTURE_TOLERANCE * ev[ev.len() - 1]) {
        return Err(format!("not positive definite (eigenvalues {:e} .. {:e})", ev[0], ev[ev.len() - 1]));
    }
    Ok(())
}

/// Theorem 4.1 (a), (b), (c) at one state; returns the first failure message per part.
fn theorem_parts(model: &GeneralHp, state: &StateVec) -> Result<[Option<String>; 3]> {
    let spec = model.spec();
    let u = state.u();
    let a0 = model.symmetrizer(state, 0.0);
    let b = spec.b_matrix(&u);
    let a = match (spd(&b), spd(&a0)) {
        (Err(e), _) => Some(format!("(a) B {e}")),
        (_, Err(e)) => Some(format!("(a) A_0 {e}")),
        _ => None,
    };

    let mut bpart = None;
    for j in 0..spec.d {
        for (label, f) in [("A-bar", model.slow_flux(&u, j)), ("A-hat", model.fast_flux(&u, j))] {
            let p = &a0 * f;
            let scale = linalg::max_abs(&p).max(1.0);
            let defect = linalg::symmetry_defect(&p) / scale;
            if bpart.is_none() && !(defect <= SYMMETRY_TOLERANCE) {
                bpart = Some(format!("(b) A_0 {label}_{} asymmetric ({defect:e})", j + 1));
            }
        }
    }

    let dims = model.dims();
    let (m, r) = (dims.m(), dims.r());
    let jac = jac_source_wrt_state(model, state, 0.0, &JacobianConfig::default())?;
    let prod = &a0 * jac;
    let mut expected = DMatrix::zeros(m + r, m + r);
    expected.view_mut((m, m), (r, r)).copy_from(&(-&b));
    let scale = linalg::max_abs(&expected).max(1.0);
    let dev = linalg::max_abs(&(&prod - &expected)) / scale;
    let top = linalg::sym_eigenvalues(&prod)[m + r - 1];
    let c = if !(dev <= SYMMETRY_TOLERANCE) {
        Some(format!("(c) A_0 Q_U differs from diag{{0, -B}} by {dev:e}"))
    } else if linalg::symmetry_defect(&prod) > SYMMETRY_TOLERANCE * scale || top > SYMMETRY_TOLERANCE * scale {
        Some(format!("(c) A_0 Q_U not symmetric negative semidefinite (top eigenvalue {top:e})"))
    } else {
        None
    };
    Ok([a, bpart, c])
}

fn run_trial(trial: usize, seed: u64, dims: (usize, usize, usize), mutate: bool) -> Result<TrialOutcome> {
    let (m, s, d) = dims;
    let mut inst = Theorem4Instance::generate(seed, m, s, d)?;
    if mutate {
        inst = mutate_flip_sign(&inst);
    }
    let (model, _) = assemble_general_hp(inst.spec())?;
    let plan = SamplePlan::for_model(&model, DEFAULT_SAMPLES, seed)?;

    let mut parts: [Option<String>; 3] = [None, None, None];
    let (mut z10a, mut z10b) = (0.0_f64, 0.0_f64);
    for entries in plan.states().into_iter().take(THEOREM_SAMPLES) {
        let state = StateVec::new(model.dims(), entries)?;
        let found = theorem_parts(&model, &state)?;
        for (slot, f) in parts.iter_mut().zip(found) {
            if slot.is_none() {
                *slot = f;
            }
        }
        let (za, zb) = z10_residuals(model.spec(), &state.u());
        z10a = z10a.max(za);
        z10b = z10b.max(zb);
    }

    let report = check_all(&model, &plan, &Tolerances::default());
    let failed_conditions = report.failed();
    let [pa, pb, pc] = parts;
    let detail = pa
        .clone()
        .or_else(|| pb.clone())
        .or_else(|| pc.clone())
        .or_else(|| {
            failed_conditions.first().map(|c| {
                let r = report.get(*c).expect("failed condition present");
                format!("condition ({c}): {}", r.detail)
            })
        });
    let passed = detail.is_none();
    Ok(TrialOutcome {
        trial,
        seed,
        dims,
        theorem_a: pa.is_none(),
        theorem_b: pb.is_none(),
        theorem_c: pc.is_none(),
        failed_conditions,
        z10a,
        z10b,
        passed,
        detail,
        witness: (!passed).then_some(inst),
    })
}

/// Generates `trials` instances (trial `i` uses seed `seed + i` and dimensions
/// `dims[i % dims.len()]`), checks Theorem 4.1 (a)-(c) and conditions (i)-(v)
/// on each, and reports the pass rate. With `mutate`, every instance is
/// replaced by its sign-flipped mutant.
pub fn validate_theorem4(
    trials: usize,
    seed: u64,
    dims: &[(usize, usize, usize)],
    mutate: bool,
) -> Result<Theorem4Report> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if dims.is_empty() {
        return Err(Error::Config("at least one (m, s, d) triple is required".into()));
    }
    for &(m, s, d) in dims {
        if s == 0 || s > m || !(1..=3).contains(&d) {
            return Err(Error::Config(format!("invalid dimensions (m, s, d) = ({m}, {s}, {d})")));
        }
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(i, seed.wrapping_add(i as u64), dims[i % dims.len()], mutate))
        .collect::<Result<Vec<_>>>()?;
    let passed = outcomes.iter().filter(|o| o.passed).count();
    Ok(Theorem4Report {
        schema_version: SCHEMA_VERSION,
        trials,
        seed,
        dims: dims.to_vec(),
        mutated: mutate,
        passed,
        pass_rate: passed as f64 / trials as f64,
        max_z10a: outcomes.iter().map(|o| o.z10a).fold(0.0, f64::max),
        max_z10b: outcomes.iter().map(|o| o.z10b).fold(0.0, f64::max),
        outcomes,
    })
}
