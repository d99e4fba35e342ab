//! IMEX integration of relaxation systems on periodic grids.
//!
//! Convection `(1/eps) sum_j A_j dU/dx_j` is explicit, the stiff source
//! `(1/eps^2) Q` implicit. The `u` rows are discretized in conservation form
//! with the model's conserved flux (when the model declares divergence-form
//! rows), the `w` rows in quasilinear form with the same face states:
//!
//! ```text
//! u rows:  (F_hat(c+1/2) - F_hat(c-1/2)) / h,  F_hat = (F(U_L) + F(U_R))/2 - alpha (U_R - U_L)/2
//! w rows:  A_j(U_c) (U_bar(c+1/2) - U_bar(c-1/2)) / h - (J(c+1/2) - J(c-1/2)) / (2h)
//! ```
//!
//! with `U_bar` the face average, `J = alpha (U_R - U_L)` and `alpha` the
//! larger spectral-radius bound of the two neighbouring cells. `imex1` uses
//! piecewise-constant face states with forward/backward Euler; `imex2` uses
//! linear reconstruction with centered slopes and the ARS(2,2,2) tableau.

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};
use rayon::prelude::*;
use serde::Serialize;

use super::{Grid, GridField, Scheme, TimePlan};
use crate::criteria::first_corrector;
use crate::error::{Error, Result};
use crate::model::{jac_source_wrt_state, Block, JacobianConfig, RelaxModel, StateVec};

/// Blow-up threshold relative to the initial maximum.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
const NEWTON_ITERATIONS: usize = 20;
const NEWTON_TOLERANCE: f64 = 1e-12;
/// Step of the central differences used to evaluate initial gradients.
const INIT_GRADIENT_STEP: f64 = 1e-4;

/// Choice of the initial relaxed variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WInit {
    /// `w = eps w_1`, which removes the initial layer.
    #[default]
    WellPrepared,
    /// `w = 0`.
    Zero,
}

/// Flux matrices and spectral-radius bounds, indexed `cell * d + dir`, or
/// just `dir` for state-independent fluxes.
struct CellData {
    mats: Vec<DMatrix<f64>>,
    radius: Vec<f64>,
    d: usize,
    shared: bool,
}

impl CellData {
    fn index(&self, c: usize, j: usize) -> usize {
        if self.shared {
            j
        } else {
            c * self.d + j
        }
    }

    fn mat(&self, c: usize, j: usize) -> &DMatrix<f64> {
        &self.mats[self.index(c, j)]
    }

    fn radius(&self, c: usize, j: usize) -> f64 {
        self.radius[self.index(c, j)]
    }
}

fn scratch_state(model: &dyn RelaxModel) -> StateVec {
    let dims = model.dims();
    StateVec::new(dims, DVector::zeros(dims.n())).expect("scratch state has n entries")
}

fn slot(buf: &[f64], k: usize, w: usize) -> DVectorView<'_, f64> {
    DVectorView::from_slice(&buf[k * w..(k + 1) * w], w)
}

fn cell_data(model: &dyn RelaxModel, field: &GridField, eps: f64) -> Result<CellData> {
    let d = field.grid().d();
    let shared = model.state_independent_flux();
    let cells = if shared { 1 } else { field.grid().len() };
    let pairs = (0..cells * d)
        .into_par_iter()
        .map_init(
            || scratch_state(model),
            |s, idx| {
                let (c, j) = (idx / d, idx % d);
                s.entries_mut().copy_from_slice(field.cell(c));
                let a = model.flux_matrix(s, eps, j);
                let rad = model.spectral_radius(s, eps, j);
                if !rad.is_finite() || !crate::linalg::is_finite(&a) {
                    return Err(Error::eval("flux matrix or spectral radius"));
                }
                Ok((a, rad))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let (mats, radius) = pairs.into_iter().unzip();
    Ok(CellData { mats, radius, d, shared })
}

/// Largest stable step `cfl * eps / sum_j (lambda_j / dx_j)`.
fn cfl_dt(data: &CellData, grid: &Grid, eps: f64, cfl: f64) -> Result<f64> {
    let d = grid.d();
    let stride = if data.shared { 1 } else { grid.len() };
    let mut rate = 0.0;
    for j in 0..d {
        let lam = (0..stride).map(|c| data.radius(c, j)).fold(0.0, f64::max);
        rate += lam / grid.spacing(j);
    }
    let dt = if rate > 0.0 { cfl * eps / rate } else { f64::INFINITY };
    if !(dt > 0.0) {
        return Err(Error::Config(format!("CFL time step {dt} is not positive")));
    }
    Ok(dt)
}

/// Stable step for `field` at `eps` under `plan`.
pub fn stable_dt(model: &dyn RelaxModel, field: &GridField, eps: f64, plan: &TimePlan) -> Result<f64> {
    let data = cell_data(model, field, eps)?;
    cfl_dt(&data, field.grid(), eps, plan.cfl)
}

/// Convection term `-(1/eps) sum_j A_j dU/dx_j`, discretized.
fn explicit_rhs(
    model: &dyn RelaxModel,
    field: &GridField,
    data: &CellData,
    eps: f64,
    scheme: Scheme,
) -> Result<Vec<f64>> {
    let grid = field.grid();
    let dims = model.dims();
    let (n, m, d) = (dims.n(), dims.m(), grid.d());
    let cells = grid.len();
    let conservative = model.conservative_u_rows();
    let cell = |c: usize| field.cell(c);

    // per axis: face means, scaled jumps and (conservative rows) numerical
    // fluxes, stored at the face between c and its upper neighbour
    let mut faces: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::with_capacity(d);
    for j in 0..d {
        let slopes = match scheme {
            Scheme::Imex1 => Vec::new(),
            Scheme::Imex2 => {
                let mut s = vec![0.0; cells * n];
                s.par_chunks_mut(n).enumerate().for_each(|(c, ch)| {
                    let (p, q) = (cell(grid.neighbor(c, j, 1)), cell(grid.neighbor(c, j, -1)));
                    for i in 0..n {
                        ch[i] = 0.25 * (p[i] - q[i]);
                    }
                });
                s
            }
        };
        let (mut mean, mut jump, mut flux) = (vec![0.0; cells * n], vec![0.0; cells * n], vec![0.0; cells * m]);
        mean.par_chunks_mut(n)
            .zip(jump.par_chunks_mut(n))
            .zip(flux.par_chunks_mut(m))
            .enumerate()
            .try_for_each_init(
                || (scratch_state(model), scratch_state(model)),
                |(left, right), (c, ((mc, jc), fc))| -> Result<()> {
                    let cp = grid.neighbor(c, j, 1);
                    let (a, b) = (cell(c), cell(cp));
                    let alpha = data.radius(c, j).max(data.radius(cp, j));
                    {
                        let (l, r) = (left.entries_mut(), right.entries_mut());
                        for i in 0..n {
                            let (sl, sr) = if slopes.is_empty() { (0.0, 0.0) } else { (slopes[c * n + i], slopes[cp * n + i]) };
                            l[i] = a[i] + sl;
                            r[i] = b[i] - sr;
                            jc[i] = alpha * (r[i] - l[i]);
                            mc[i] = 0.5 * (l[i] + r[i]);
                        }
                    }
                    if conservative {
                        let (fl, fr) = (model.conserved_flux(left, eps, j), model.conserved_flux(right, eps, j));
                        for i in 0..m {
                            fc[i] = 0.5 * (fl[i] + fr[i] - jc[i]);
                        }
                        if !fc.iter().all(|x| x.is_finite()) {
                            return Err(Error::eval("conserved flux"));
                        }
                    }
                    Ok(())
                },
            )?;
        faces.push((mean, jump, flux));
    }

    let inv_eps = 1.0 / eps;
    // quasilinear rows: -A (mean+ - mean-) + (jump+ - jump-) / 2, over eps h;
    // conservative rows: -(flux+ - flux-) over eps h
    let q0 = if conservative { m } else { 0 };
    let mut rhs = vec![0.0; cells * n];
    rhs.par_chunks_mut(n).enumerate().for_each(|(c, chunk)| {
        let mut out = DVectorViewMut::from_slice(chunk, n);
        for j in 0..d {
            let scale = inv_eps / grid.spacing(j);
            let cm = grid.neighbor(c, j, -1);
            let (mean, jump, flux) = &faces[j];
            let a = data.mat(c, j).rows(q0, n - q0);
            let mut quasi = out.rows_mut(q0, n - q0);
            quasi.gemv(-scale, &a, &slot(mean, c, n), 1.0);
            quasi.gemv(scale, &a, &slot(mean, cm, n), 1.0);
            quasi.axpy(0.5 * scale, &slot(jump, c, n).rows(q0, n - q0), 1.0);
            quasi.axpy(-0.5 * scale, &slot(jump, cm, n).rows(q0, n - q0), 1.0);
            if conservative {
                for i in 0..m {
                    out[i] -= scale * (flux[c * m + i] - flux[cm * m + i]);
                }
            }
        }
    });
    Ok(rhs)
}

/// Solves `K = Y + c dt (1/eps^2) Q(K)` cell by cell; the `u` part of `K` is `Y^u`.
fn implicit_stage(model: &dyn RelaxModel, y: &[f64], eps: f64, cdt: f64, t: f64) -> Result<Vec<f64>> {
    let dims = model.dims();
    let (n, m, r) = (dims.n(), dims.m(), dims.r());
    let tau = cdt / (eps * eps);
    let mut out = y.to_vec();
    out.par_chunks_mut(n).try_for_each(|k| -> Result<()> {
        let u = DVector::from_column_slice(&k[..m]);
        match model.affine_relaxation(&u, eps) {
            Some(aff) => {
                for i in 0..r {
                    k[m + i] = (k[m + i] + tau * aff.offset[i]) / (1.0 + tau * aff.rates[i]);
                }
            }
            None => {
                let yw = DVector::from_column_slice(&k[m..]);
                let w = newton_relax(model, &u, &yw, eps, tau, t)?;
                k[m..].copy_from_slice(w.as_slice());
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Damped Newton for `w - y_w - tau q(u, w; eps) = 0`.
fn newton_relax(model: &dyn RelaxModel, u: &DVector<f64>, yw: &DVector<f64>, eps: f64, tau: f64, t: f64) -> Result<DVector<f64>> {
    let dims = model.dims();
    let (m, r) = (dims.m(), dims.r());
    let cfg = JacobianConfig::default();
    let residual = |w: &DVector<f64>| -> Result<DVector<f64>> {
        let s = StateVec::from_parts(dims, u, w)?;
        let q = model.source(&s, eps).rows(m, r).into_owned();
        Ok(w - yw - q * tau)
    };
    let mut w = yw.clone();
    let mut res = residual(&w)?;
    for _ in 0..NEWTON_ITERATIONS {
        if res.amax() <= NEWTON_TOLERANCE * w.amax().max(1.0) {
            return Ok(w);
        }
        let s = StateVec::from_parts(dims, u, &w)?;
        let jac = jac_source_wrt_state(model, &s, eps, &cfg)?;
        let g = DMatrix::identity(r, r) - Block::B22.extract(&jac, m, r) * tau;
        let step = g.lu().solve(&res).ok_or_else(|| Error::Divergence {
            t,
            reason: "singular Newton matrix in the implicit source solve".into(),
        })?;
        let mut lambda = 1.0;
        loop {
            let trial = &w - &step * lambda;
            let tr = residual(&trial)?;
            if tr.norm() < res.norm() || lambda < 1e-4 {
                w = trial;
                res = tr;
                break;
            }
            lambda *= 0.5;
        }
    }
    if res.amax() <= NEWTON_TOLERANCE * w.amax().max(1.0) {
        Ok(w)
    } else {
        Err(Error::Divergence {
            t,
            reason: format!("implicit source solve did not converge (residual {:e})", res.amax()),
        })
    }
}

fn axpy(y: &[f64], terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, v) in terms {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += c * x;
        }
    }
    out
}

fn with_values(field: &GridField, values: Vec<f64>) -> Result<GridField> {
    GridField::new(field.grid().clone(), field.width(), values)
}

/// One step of size `dt` from time `t`.
fn advance(model: &dyn RelaxModel, field: &GridField, data: CellData, eps: f64, dt: f64, scheme: Scheme, t: f64) -> Result<GridField> {
    let u0 = field.values();
    match scheme {
        Scheme::Imex1 => {
            let f1 = explicit_rhs(model, field, &data, eps, scheme)?;
            let y = axpy(u0, &[(dt, &f1)]);
            with_values(field, implicit_stage(model, &y, eps, dt, t)?)
        }
        Scheme::Imex2 => {
            let gamma = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
            let delta = 1.0 - 1.0 / (2.0 * gamma);
            let f1 = explicit_rhs(model, field, &data, eps, scheme)?;
            let y2 = axpy(u0, &[(gamma * dt, &f1)]);
            let k2 = implicit_stage(model, &y2, eps, gamma * dt, t)?;
            // S(K2) recovered from the implicit relation, avoiding a stiff re-evaluation
            let s2: Vec<f64> = k2.iter().zip(&y2).map(|(k, y)| (k - y) / (gamma * dt)).collect();
            let k2f = with_values(field, k2)?;
            let d2 = cell_data(model, &k2f, eps)?;
            let f2 = explicit_rhs(model, &k2f, &d2, eps, scheme)?;
            let y3 = axpy(u0, &[(delta * dt, &f1), ((1.0 - delta) * dt, &f2), ((1.0 - gamma) * dt, &s2)]);
            with_values(field, implicit_stage(model, &y3, eps, gamma * dt, t)?)
        }
    }
}

/// One IMEX step with the CFL step size; returns the new field and the step used.
pub fn step_relax(model: &dyn RelaxModel, field: &GridField, eps: f64, plan: &TimePlan) -> Result<(GridField, f64)> {
    check_eps(eps)?;
    check_width(model, field)?;
    let data = cell_data(model, field, eps)?;
    let dt = cfl_dt(&data, field.grid(), eps, plan.cfl)?.min(plan.t_end);
    Ok((advance(model, field, data, eps, dt, plan.scheme, 0.0)?, dt))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("eps must be positive for time stepping, got {eps}")));
    }
    Ok(())
}

fn check_width(model: &dyn RelaxModel, field: &GridField) -> Result<()> {
    if field.width() != model.dims().n() {
        return Err(Error::Config(format!(
            "field has {} components, model has n = {}",
            field.width(),
            model.dims().n()
        )));
    }
    if field.grid().d() != model.dims().d() {
        return Err(Error::Config("grid and model space dimensions differ".into()));
    }
    Ok(())
}

/// Summary of a relaxation run.
#[derive(Debug, Clone)]
pub struct RelaxRun {
    pub field: GridField,
    pub t: f64,
    pub steps: usize,
    /// Largest step taken (the last step may be shorter).
    pub dt: f64,
    pub u_sum_initial: Vec<f64>,
    pub u_sum_final: Vec<f64>,
    /// `max_k |sum u_k(final) - sum u_k(initial)| / max(1, |sum u_k(initial)|)`.
    pub conservation_defect: f64,
    /// `max |w - eps w_1[u]|` at the start and the end of the run.
    pub stiffness_initial: f64,
    pub stiffness_final: f64,
}

/// Advances `init` to `plan.t_end`, truncating the last step to land on it exactly.
pub fn solve_relax(model: &dyn RelaxModel, init: &GridField, eps: f64, plan: &TimePlan) -> Result<RelaxRun> {
    check_eps(eps)?;
    check_width(model, init)?;
    let m = model.dims().m();
    let initial_max = init.max_abs().max(f64::MIN_POSITIVE);
    let sums = |f: &GridField| (0..m).map(|k| f.component_sum(k)).collect::<Vec<_>>();
    let u_sum_initial = sums(init);
    let stiffness_initial = stiffness(model, init, eps)?;

    let mut field = init.clone();
    let (mut t, mut steps, mut dt_max) = (0.0_f64, 0usize, 0.0_f64);
    while t < plan.t_end {
        let data = cell_data(model, &field, eps)?;
        let mut dt = cfl_dt(&data, field.grid(), eps, plan.cfl)?;
        let last = t + dt >= plan.t_end * (1.0 - 1e-14);
        if last {
            dt = plan.t_end - t;
        }
        field = advance(model, &field, data, eps, dt, plan.scheme, t).map_err(|e| match e {
            Error::Evaluation { what } => Error::Divergence {
                t,
                reason: format!("non-finite {what}"),
            },
            other => other,
        })?;
        t = if last { plan.t_end } else { t + dt };
        steps += 1;
        dt_max = dt_max.max(dt);
        let mx = field.max_abs();
        if !(mx <= DIVERGENCE_FACTOR * initial_max) {
            return Err(Error::Divergence {
                t,
                reason: format!("max |U| = {mx:e} exceeds {DIVERGENCE_FACTOR:e} x initial {initial_max:e}"),
            });
        }
    }

    let u_sum_final = sums(&field);
    let conservation_defect = u_sum_initial
        .iter()
        .zip(&u_sum_final)
        .map(|(a, b)| (b - a).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max);
    let stiffness_final = stiffness(model, &field, eps)?;
    Ok(RelaxRun {
        field,
        t,
        steps,
        dt: dt_max,
        u_sum_initial,
        u_sum_final,
        conservation_defect,
        stiffness_initial,
        stiffness_final,
    })
}

/// `max |w - eps w_1|` with `w_1` from centered grid gradients of `u`.
pub fn stiffness(model: &dyn RelaxModel, field: &GridField, eps: f64) -> Result<f64> {
    let dims = model.dims();
    let (n, m) = (dims.n(), dims.m());
    let grid = field.grid();
    let vals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let u = DVector::from_column_slice(&field.cell(c)[..m]);
            let grads: Vec<DVector<f64>> = (0..grid.d())
                .map(|j| {
                    let p = &field.cell(grid.neighbor(c, j, 1))[..m];
                    let q = &field.cell(grid.neighbor(c, j, -1))[..m];
                    DVector::from_fn(m, |i, _| (p[i] - q[i]) / (2.0 * grid.spacing(j)))
                })
                .collect();
            let w1 = first_corrector(model, &u, &grads)?;
            let w = &field.cell(c)[m..n];
            Ok(w.iter().zip(w1.iter()).map(|(a, b)| (a - eps * b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Relaxation state on `grid` with `u = u0(x)` and `w` per `winit`.
pub fn relax_initial<F>(model: &dyn RelaxModel, grid: &Grid, u0: F, eps: f64, winit: WInit) -> Result<GridField>
where
    F: Fn(&[f64]) -> DVector<f64> + Sync,
{
    let dims = model.dims();
    let (n, m, d) = (dims.n(), dims.m(), dims.d());
    if grid.d() != d {
        return Err(Error::Config("grid and model space dimensions differ".into()));
    }
    let cells: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let x = grid.center(c);
            let u = u0(&x);
            if u.len() != m {
                return Err(Error::Config(format!("initial profile has {} entries, expected {m}", u.len())));
            }
            let w = match winit {
                WInit::Zero => DVector::zeros(n - m),
                WInit::WellPrepared => {
                    let h = INIT_GRADIENT_STEP;
                    let grads: Vec<DVector<f64>> = (0..d)
                        .map(|j| {
                            let mut xp = x.clone();
                            let mut xm = x.clone();
                            xp[j] += h;
                            xm[j] -= h;
                            (u0(&xp) - u0(&xm)) / (2.0 * h)
                        })
                        .collect();
                    first_corrector(model, &u, &grads)? * eps
                }
            };
            let s = StateVec::from_parts(dims, &u, &w)?;
            model.state_box().check(s.entries())?;
            Ok(s.into_entries().data.as_vec().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    GridField::new(grid.clone(), n, cells.concat())
}
