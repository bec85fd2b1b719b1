//! Staggered and centered time grids on `[0, 1]` and the difference and
//! averaging operators between them.
//!
//! With `N` centered points the staggered grid holds the `N + 1` times
//! `k / N` and the centered grid the `N` midpoints `(k + 1/2) / N`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    n: usize,
}

impl TimeGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("time grid needs at least one step".into()));
        }
        Ok(TimeGrid { n })
    }

    /// Number of centered points.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn staggered_times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| k as f64 / self.n as f64).collect()
    }

    pub fn centered_times(&self) -> Vec<f64> {
        (0..self.n).map(|k| (k as f64 + 0.5) / self.n as f64).collect()
    }
}

/// Row-major slab of `rows x cols` reals: one row per time, one column per
/// vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeField {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Values on the `N + 1` staggered times.
pub type StaggeredField = TimeField;
/// Values on the `N` centered times.
pub type CenteredField = TimeField;

impl TimeField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TimeField { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::SizeMismatch { expected: cols, got: bad.len() });
        }
        let n = rows.len();
        Ok(TimeField { rows: n, cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::SizeMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(TimeField { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }
}

/// `(D phi)^t = (phi^{t + tau/2} - phi^{t - tau/2}) / tau`, staggered to centered.
pub fn time_derivative(phi: &StaggeredField) -> CenteredField {
    assert!(phi.rows >= 2, "need at least two staggered slices");
    let n = phi.rows - 1;
    let inv_tau = n as f64;
    let mut out = TimeField::zeros(n, phi.cols);
    for t in 0..n {
        let (a, b) = (phi.row(t), phi.row(t + 1));
        for ((o, x), y) in out.row_mut(t).iter_mut().zip(a).zip(b) {
            *o = (y - x) * inv_tau;
        }
    }
    out
}

/// Adjoint of [`time_derivative`] for the `tau`-weighted inner products on
/// both grids (vertex weights commute and drop out).
pub fn time_derivative_adjoint(psi: &CenteredField) -> StaggeredField {
    let n = psi.rows;
    let inv_tau = n as f64;
    let mut out = TimeField::zeros(n + 1, psi.cols);
    for t in 0..n {
        for (v, &p) in psi.row(t).iter().enumerate() {
            out.data[t * psi.cols + v] -= p * inv_tau;
            out.data[(t + 1) * psi.cols + v] += p * inv_tau;
        }
    }
    out
}

/// Midpoint average of adjacent staggered slices.
pub fn time_average(phi: &StaggeredField) -> CenteredField {
    assert!(phi.rows >= 2, "need at least two staggered slices");
    let n = phi.rows - 1;
    let mut out = TimeField::zeros(n, phi.cols);
    for t in 0..n {
        let (a, b) = (phi.row(t), phi.row(t + 1));
        for ((o, x), y) in out.row_mut(t).iter_mut().zip(a).zip(b) {
            *o = 0.5 * (x + y);
        }
    }
    out
}

/// `tau * sum_t sum_v w_v a^t_v b^t_v`.
pub fn weighted_inner(a: &TimeField, b: &TimeField, vertex_weights: &[f64], tau: f64) -> f64 {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols));
    let mut s = 0.0;
    for (ra, rb) in a.iter_rows().zip(b.iter_rows()) {
        s += ra.iter().zip(rb).zip(vertex_weights).map(|((x, y), w)| x * y * w).sum::<f64>();
    }
    tau * s
}
