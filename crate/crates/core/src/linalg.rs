//! Small dense linear-algebra helpers shared by the models and the checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition number above which a matrix is treated as numerically singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Largest entry of `|M - M^T|`.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut defect = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    defect
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 {
        return DVector::zeros(0);
    }
    let mut ev = symmetrize(m).symmetric_eigenvalues();
    ev.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub fn is_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU inverse together with the 1-norm condition number.
pub fn inverse_with_condition(m: &DMatrix<f64>, what: &str) -> Result<(DMatrix<f64>, f64)> {
    if m.nrows() == 0 {
        return Ok((DMatrix::zeros(0, 0), 1.0));
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    if !is_finite(&inv) {
        return Err(Error::Singular(what.to_string()));
    }
    let cond = norm1(m) * norm1(&inv);
    Ok((inv, cond))
}

/// Inverse that rejects matrices with condition number above [`SINGULAR_CONDITION`].
pub fn checked_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let (inv, cond) = inverse_with_condition(m, what)?;
    if !(cond <= SINGULAR_CONDITION) {
        return Err(Error::Singular(format!("{what} (condition estimate {cond:.3e})")));
    }
    Ok(inv)
}

/// Inverse used inside model callbacks: a singular input yields a NaN matrix so the
/// caller's finiteness checks report it.
pub fn inverse_or_nan(m: &DMatrix<f64>) -> DMatrix<f64> {
    match checked_inverse(m, "callback matrix") {
        Ok(inv) => inv,
        Err(_) => DMatrix::from_element(m.nrows(), m.ncols(), f64::NAN),
    }
}

/// Singular values, descending.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    let mut sv = m.clone().singular_values();
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetry_defect_of_symmetric_is_zero() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(symmetry_defect(&m), 0.0);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.5, 3.0]);
        assert!((symmetry_defect(&a) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let ev = sym_eigenvalues(&m);
        assert_eq!(ev.as_slice(), &[-1.0, 2.0]);
    }

    #[test]
    fn singular_inverse_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(checked_inverse(&m, "test").is_err());
        let nan = inverse_or_nan(&m);
        assert!(nan[(0, 0)].is_nan());
    }

    #[test]
    fn block_diag_layout() {
        let a = DMatrix::from_element(1, 1, 2.0);
        let b = DMatrix::identity(2, 2);
        let d = block_diag(&[a, b]);
        assert_eq!(d.nrows(), 3);
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(2, 2)], 1.0);
        assert_eq!(d[(0, 1)], 0.0);
    }
}
