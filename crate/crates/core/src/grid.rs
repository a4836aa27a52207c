//! Doubly periodic scalar fields.
//!
//! A [`Field`] is an `rows × cols` row-major grid of finite `f64` values. All
//! spatial operations in this crate treat the grid as a torus: index
//! arithmetic wraps in both directions.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::spectral::Fft2;

/// A periodic 2D scalar field. Vorticity snapshots, MRA channels, Λ maps and
/// residuals all share this type.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    time: Option<f64>,
}

/// A vorticity snapshot (units 1/s) with an optional simulation time tag.
pub type VorticityField = Field;

impl Field {
    /// Builds a field from row-major values, rejecting empty grids, length
    /// mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("grid must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} values for a {rows}x{cols} grid, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {} at ({}, {})",
                data[i],
                i / cols,
                i % cols
            )));
        }
        Ok(Field {
            rows,
            cols,
            data,
            time: None,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be non-empty");
        Field {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            time: None,
        }
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Self {
        let mut f = Field::zeros(rows, cols);
        f.data.fill(value);
        f
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "grid must be non-empty");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Field {
            rows,
            cols,
            data,
            time: None,
        }
    }

    /// Wraps an already validated buffer. Used on hot paths where values come
    /// from arithmetic on finite inputs.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Field {
            rows,
            cols,
            data,
            time: None,
        }
    }

    pub fn with_time(mut self, time: Option<f64>) -> Self {
        self.time = time;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn set_time(&mut self, time: Option<f64>) {
        self.time = time;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Value at a possibly out-of-range position, wrapped onto the torus.
    pub fn get_wrapped(&self, r: isize, c: isize) -> f64 {
        let r = r.rem_euclid(self.rows as isize) as usize;
        let c = c.rem_euclid(self.cols as isize) as usize;
        self.data[r * self.cols + c]
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub(crate) fn check_same_shape(&self, other: &Field) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Population standard deviation of the values.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.len() as f64).sqrt()
    }

    pub fn dot(&self, other: &Field) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        let mut f = self.clone();
        f.scale(alpha);
        f
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
            time: self.time,
        }
    }

    pub fn transpose(&self) -> Field {
        Field::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Circular shift: `out[(i + dr) mod M][(j + dc) mod N] = self[i][j]`.
    pub fn shifted(&self, dr: isize, dc: isize) -> Field {
        let (m, n) = (self.rows as isize, self.cols as isize);
        let dr = dr.rem_euclid(m) as usize;
        let dc = dc.rem_euclid(n) as usize;
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            let dst = (i + dr) % self.rows;
            let src_row = self.row(i);
            let dst_row = &mut out[dst * self.cols..(dst + 1) * self.cols];
            // Row rotation: dst_row[(j + dc) % cols] = src_row[j]
            dst_row[dc..].copy_from_slice(&src_row[..self.cols - dc]);
            dst_row[..dc].copy_from_slice(&src_row[self.cols - dc..]);
        }
        Field {
            rows: self.rows,
            cols: self.cols,
            data: out,
            time: self.time,
        }
    }
}

impl Index<(usize, usize)> for Field {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Field {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Circular shift of a field by `(dr, dc)`; see [`Field::shifted`].
pub fn circular_shift(f: &Field, dr: isize, dc: isize) -> Field {
    f.shifted(dr, dc)
}

/// Circular cross-correlation of `a` with every translate of `b`:
///
/// `out[r][c] = Σ_{i,j} a[i][j] · b[(i − r) mod M][(j − c) mod N]`
///
/// computed through the frequency domain.
pub fn cross_correlation_map(a: &Field, b: &Field) -> Result<Field> {
    a.check_same_shape(b)?;
    let fft = Fft2::new(a.rows(), a.cols());
    let sa = fft.forward(a);
    let sb = fft.forward(b);
    Ok(fft.inverse(&sa.mul_conj(&sb)))
}

/// Shortest signed periodic displacement from `from` to `to` on a ring of
/// length `n`.
pub fn periodic_offset(from: usize, to: usize, n: usize) -> isize {
    let n = n as isize;
    let d = (to as isize - from as isize).rem_euclid(n);
    if d > n / 2 {
        d - n
    } else {
        d
    }
}

/// Euclidean distance between two grid points on the torus.
pub fn periodic_distance(a: (usize, usize), b: (usize, usize), rows: usize, cols: usize) -> f64 {
    let dr = periodic_offset(a.0, b.0, rows) as f64;
    let dc = periodic_offset(a.1, b.1, cols) as f64;
    dr.hypot(dc)
}
