//! Explicit reference solver for the target hyperbolic-parabolic system.
//!
//! Second-order central differences in space (diffusion in flux form with
//! face-averaged coefficients, advection `a_j(u) du/dx_j` centered), Heun
//! (SSP-RK2) in time with `dt = 0.4 dx^2 / (d max |D|)`, further limited by
//! the advective CFL bound.

use nalgebra::{DVector, DVectorView, DVectorViewMut};
use rayon::prelude::*;

use super::{Grid, GridField};
use crate::error::{Error, Result};
use crate::model::TargetPde;

const DIFFUSIVE_FACTOR: f64 = 0.4;
const ADVECTIVE_FACTOR: f64 = 0.5;
/// Steps between re-evaluations of the step bound (it never increases).
const BOUND_REFRESH: usize = 50;

fn rhs(target: &TargetPde, field: &GridField) -> Vec<f64> {
    let grid = field.grid();
    let (m, d, cells) = (target.m(), grid.d(), grid.len());
    let view = |c: usize| DVectorView::from_slice(field.cell(c), m);
    let central: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let inv = 1.0 / (2.0 * grid.spacing(k));
            let mut g = vec![0.0; cells * m];
            for (c, chunk) in g.chunks_mut(m).enumerate() {
                let (p, q) = (field.cell(grid.neighbor(c, k, 1)), field.cell(grid.neighbor(c, k, -1)));
                for i in 0..m {
                    chunk[i] = (p[i] - q[i]) * inv;
                }
            }
            g
        })
        .collect();
    // diffusive flux through the face between c and its upper neighbour along j,
    // with face-averaged coefficients
    let flux: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let h = grid.spacing(j);
            let mut f = vec![0.0; cells * m];
            f.par_chunks_mut(m).enumerate().for_each_init(
                || (DVector::zeros(m), DVector::zeros(m)),
                |(face_u, grad), (c, chunk)| {
                    let cp = grid.neighbor(c, j, 1);
                    let (uc, up) = (field.cell(c), field.cell(cp));
                    for i in 0..m {
                        face_u[i] = 0.5 * (uc[i] + up[i]);
                    }
                    let mut out = DVectorViewMut::from_slice(chunk, m);
                    for k in 0..d {
                        for i in 0..m {
                            grad[i] = if k == j {
                                (up[i] - uc[i]) / h
                            } else {
                                0.5 * (central[k][c * m + i] + central[k][cp * m + i])
                            };
                        }
                        out.gemv(1.0, &target.diffusion(face_u, j, k), grad, 1.0);
                    }
                },
            );
            f
        })
        .collect();
    let mut out = vec![0.0; cells * m];
    out.par_chunks_mut(m).enumerate().for_each_init(
        || DVector::zeros(m),
        |u, (c, chunk)| {
            u.copy_from(&view(c));
            let mut o = DVectorViewMut::from_slice(chunk, m);
            for j in 0..d {
                let h = grid.spacing(j);
                let cm = grid.neighbor(c, j, -1);
                let g = DVectorView::from_slice(&central[j][c * m..(c + 1) * m], m);
                o.gemv(-1.0, &target.advection(u, j), &g, 1.0);
                o.axpy(1.0 / h, &DVectorView::from_slice(&flux[j][c * m..(c + 1) * m], m), 1.0);
                o.axpy(-1.0 / h, &DVectorView::from_slice(&flux[j][cm * m..(cm + 1) * m], m), 1.0);
            }
        },
    );
    out
}

fn row_sum_norm(a: &nalgebra::DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `min(0.4 dx^2 / (d max |D|), 0.5 dx / max |a|)` over the current field,
/// with `|D|` the largest row sum of `sum_k |D_jk|`.
fn step_bound(target: &TargetPde, field: &GridField) -> Result<f64> {
    let grid = field.grid();
    let d = grid.d();
    let mut dmax = 0.0_f64;
    let mut amax = 0.0_f64;
    for c in 0..grid.len() {
        let u = field.cell_vector(c);
        for j in 0..d {
            amax = amax.max(row_sum_norm(&target.advection(&u, j)));
            let row_sum: f64 = (0..d).map(|k| row_sum_norm(&target.diffusion(&u, j, k))).sum();
            dmax = dmax.max(row_sum);
        }
    }
    let hmin = (0..d).map(|k| grid.spacing(k)).fold(f64::INFINITY, f64::min);
    let mut dt = f64::INFINITY;
    if dmax > 0.0 {
        dt = dt.min(DIFFUSIVE_FACTOR * hmin * hmin / (d as f64 * dmax));
    }
    if amax > 0.0 {
        dt = dt.min(ADVECTIVE_FACTOR * hmin / amax);
    }
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Config("reference time step is not positive".into()));
    }
    Ok(dt)
}

/// Advances the target system from `init` to `t_end`.
pub fn solve_target_reference(target: &TargetPde, init: &GridField, t_end: f64) -> Result<GridField> {
    if init.width() != target.m() || init.grid().d() != target.d() {
        return Err(Error::Config("reference field does not match the target dimensions".into()));
    }
    if !(t_end >= 0.0) {
        return Err(Error::Config(format!("t_end must be nonnegative, got {t_end}")));
    }
    let mut dt_max = step_bound(target, init)?;
    if !dt_max.is_finite() {
        // no transport at all: the solution is constant in time
        return Ok(init.clone());
    }
    let diverged = |t: f64| Error::Divergence {
        t,
        reason: "reference solver produced non-finite values".into(),
    };
    let mut field = init.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    while t < t_end {
        if steps > 0 && steps.is_multiple_of(BOUND_REFRESH) {
            dt_max = dt_max.min(step_bound(target, &field)?);
        }
        let last = t + dt_max >= t_end;
        let dt = if last { t_end - t } else { dt_max };
        let l0 = rhs(target, &field);
        let stage: Vec<f64> = field.values().iter().zip(&l0).map(|(u, l)| u + dt * l).collect();
        let stage = GridField::new(field.grid().clone(), field.width(), stage).map_err(|_| diverged(t))?;
        let l1 = rhs(target, &stage);
        let next: Vec<f64> = field
            .values()
            .iter()
            .zip(stage.values())
            .zip(&l1)
            .map(|((u, s), l)| 0.5 * u + 0.5 * (s + dt * l))
            .collect();
        field = GridField::new(field.grid().clone(), field.width(), next).map_err(|_| diverged(t))?;
        t = if last { t_end } else { t + dt };
        steps += 1;
    }
    Ok(field)
}

/// Samples a solution on `grid` at time `t`.
pub fn sample_solution(grid: &Grid, m: usize, sol: &crate::model::SolutionFn, t: f64) -> Result<GridField> {
    GridField::from_fn(grid.clone(), m, |x| sol(x, t))
}
