//! Periodic uniform grids and fields of vectors on them.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS: usize = 8;

/// Periodic uniform grid on `[0, L_0) x ... x [0, L_{d-1})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    cells: Vec<usize>,
    extent: Vec<f64>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(cells: &[usize], extent: &[f64]) -> Result<Self> {
        let d = cells.len();
        if !(1..=3).contains(&d) || extent.len() != d {
            return Err(Error::Config(format!(
                "grid needs 1 to 3 axes with matching extents, got {} cells / {} extents",
                d,
                extent.len()
            )));
        }
        if let Some(c) = cells.iter().find(|&&c| c < MIN_CELLS) {
            return Err(Error::Config(format!("grid needs at least {MIN_CELLS} cells per axis, got {c}")));
        }
        if extent.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::Config("grid extents must be positive".into()));
        }
        let mut strides = vec![1; d];
        for k in 1..d {
            strides[k] = strides[k - 1] * cells[k - 1];
        }
        Ok(Self {
            cells: cells.to_vec(),
            extent: extent.to_vec(),
            spacing: cells.iter().zip(extent).map(|(&c, &l)| l / c as f64).collect(),
            strides,
        })
    }

    /// `cells` per axis on the periodic cell `[0, 2 pi)^d`.
    pub fn periodic(d: usize, cells: usize) -> Result<Self> {
        Self::new(&vec![cells; d], &vec![std::f64::consts::TAU; d])
    }

    pub fn d(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis index of cell `idx` (axis 0 varies fastest).
    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        (0..self.d()).map(|k| (idx / self.strides[k]) % self.cells[k]).collect()
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .zip(&self.spacing)
            .map(|(&i, &h)| (i as f64 + 0.5) * h)
            .collect()
    }

    /// Periodic neighbour of `idx` displaced by `offset` cells along `axis`.
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.cells[axis] as isize;
        let i = ((idx / self.strides[axis]) % self.cells[axis]) as isize;
        let j = (i + offset).rem_euclid(n);
        (idx as isize + (j - i) * self.strides[axis] as isize) as usize
    }

    /// The grid with every axis refined by `factor`.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        let cells: Vec<usize> = self.cells.iter().map(|c| c * factor).collect();
        Self::new(&cells, &self.extent)
    }

    /// Index in the `factor`-times refined grid of the fine cell sharing this
    /// cell's center (requires an odd factor).
    pub fn refined_index(&self, idx: usize, factor: usize) -> usize {
        debug_assert!(factor % 2 == 1);
        let mut out = 0;
        let mut stride = 1;
        for (k, i) in self.multi_index(idx).into_iter().enumerate() {
            out += (i * factor + factor / 2) * stride;
            stride *= self.cells[k] * factor;
        }
        out
    }
}

/// A vector of `width` reals in every cell, stored cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    width: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, width: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || values.len() != grid.len() * width {
            return Err(Error::Config(format!(
                "field has {} values, expected {} cells x {width}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::eval("grid field"));
        }
        Ok(Self { grid, width, values })
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn<F>(grid: Grid, width: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> DVector<f64>,
    {
        let mut values = Vec::with_capacity(grid.len() * width);
        for idx in 0..grid.len() {
            let v = f(&grid.center(idx));
            if v.len() != width {
                return Err(Error::Config(format!("field callback returned {} entries, expected {width}", v.len())));
            }
            values.extend(v.iter());
        }
        Self::new(grid, width, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.width..(idx + 1) * self.width]
    }

    pub fn cell_vector(&self, idx: usize) -> DVector<f64> {
        DVector::from_column_slice(self.cell(idx))
    }

    /// The first `k` entries of every cell.
    pub fn leading(&self, k: usize) -> Result<GridField> {
        if k == 0 || k > self.width {
            return Err(Error::Config(format!("cannot take {k} of {} components", self.width)));
        }
        let values = self.values.chunks(self.width).flat_map(|c| c[..k].iter().copied()).collect();
        Self::new(self.grid.clone(), k, values)
    }

    /// Grid sum of component `k`.
    pub fn component_sum(&self, k: usize) -> f64 {
        self.values.iter().skip(k).step_by(self.width).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Discrete L2 norm `sqrt(sum |v|^2 * cell volume)`.
    pub fn l2(&self) -> f64 {
        let vol: f64 = (0..self.grid.d()).map(|k| self.grid.spacing(k)).product();
        (self.values.iter().map(|v| v * v).sum::<f64>() * vol).sqrt()
    }

    /// Writes `cell, x0[, x1[, x2]], c0, c1, ...` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header = vec!["cell".to_string()];
        header.extend((0..self.grid.d()).map(|k| format!("x{k}")));
        header.extend((0..self.width).map(|k| format!("c{k}")));
        let csv_err = |e: csv::Error| Error::Serde(e.to_string());
        w.write_record(&header).map_err(csv_err)?;
        for idx in 0..self.grid.len() {
            let mut row = vec![idx.to_string()];
            row.extend(self.grid.center(idx).iter().map(|x| x.to_string()));
            row.extend(self.cell(idx).iter().map(|x| x.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        let mut inner = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
        inner.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbours_wrap() {
        let g = Grid::periodic(2, 8).unwrap();
        assert_eq!(g.neighbor(0, 0, -1), 7);
        assert_eq!(g.neighbor(7, 0, 1), 0);
        assert_eq!(g.neighbor(0, 1, -1), 56);
        assert_eq!(g.neighbor(9, 1, 1), 17);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid::periodic(1, 4).is_err());
        assert!(Grid::periodic(4, 16).is_err());
    }

    #[test]
    fn refined_index_shares_center() {
        let g = Grid::periodic(2, 8).unwrap();
        let f = g.refine(5).unwrap();
        for idx in [0, 5, 17, 63] {
            let a = g.center(idx);
            let b = f.center(g.refined_index(idx, 5));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::periodic(1, 8).unwrap();
        let f = GridField::from_fn(g, 2, |x| DVector::from_column_slice(&[x[0].sin(), 1.0 / 3.0])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        f.write_csv(&p).unwrap();
        let mut r = csv::Reader::from_path(&p).unwrap();
        let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 8);
        for (idx, row) in rows.iter().enumerate() {
            let c0: f64 = row[2].parse().unwrap();
            assert_eq!(c0, f.cell(idx)[0]);
        }
    }
}
