//! Compressed sparse rows and an envelope (skyline) Cholesky factorization
//! with reverse Cuthill-McKee ordering.
//!
//! The factorization accepts positive semidefinite matrices whose kernel is
//! spanned by the constant vector (graph and cotangent Laplacians of a
//! connected mesh). For those, the last pivot in elimination order vanishes;
//! it is flagged and the corresponding unknown is left out of the triangular
//! solves. Callers then remove the constant component of the solution.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            let k = cursor[i];
            cols[k] = j;
            vals[k] = v;
            cursor[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_unstable_by_key(|&(j, _)| j);
            for &(j, v) in &scratch {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `alpha * diag(d) + beta * self`, for square matrices.
    pub fn shifted(&self, alpha: f64, d: &[f64], beta: f64) -> CsrMatrix {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(d.len(), self.nrows);
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + self.nrows);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                triplets.push((i, j, beta * v));
            }
            triplets.push((i, i, alpha * d[i]));
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

/// Reverse Cuthill-McKee permutation of a structurally symmetric matrix.
/// `perm[k]` is the original index placed at position `k`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).unwrap();
        let start = pseudo_peripheral(a, seed, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        let mut neighbours = Vec::new();
        while let Some(u) = queue.pop_front() {
            order.push(u);
            neighbours.clear();
            neighbours.extend(a.row(u).map(|(j, _)| j).filter(|&j| j != u && !visited[j]));
            neighbours.sort_unstable_by_key(|&j| (degree[j], j));
            for &j in &neighbours {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &CsrMatrix, start: usize) -> (Vec<usize>, usize) {
    let mut level = vec![usize::MAX; a.nrows()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut last = start;
    while let Some(u) = queue.pop_front() {
        last = u;
        for (j, _) in a.row(u) {
            if level[j] == usize::MAX {
                level[j] = level[u] + 1;
                queue.push_back(j);
            }
        }
    }
    (level, last)
}

fn pseudo_peripheral(a: &CsrMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut current = seed;
    let (mut levels, _) = bfs_levels(a, current);
    let mut ecc = levels.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
    for _ in 0..8 {
        let candidate = (0..a.nrows())
            .filter(|&i| levels[i] == ecc)
            .min_by_key(|&i| degree[i])
            .unwrap_or(current);
        let (next_levels, _) = bfs_levels(a, candidate);
        let next_ecc = next_levels.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
        if next_ecc <= ecc {
            break;
        }
        current = candidate;
        levels = next_levels;
        ecc = next_ecc;
    }
    current
}

/// Row-envelope Cholesky factor `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    perm: Vec<usize>,
    /// first column stored in each permuted row
    first: Vec<usize>,
    /// offset of each row's slice in `data`; row `i` holds columns `first[i]..=i`
    offset: Vec<usize>,
    data: Vec<f64>,
    null_pivot: Option<usize>,
}

impl EnvelopeCholesky {
    /// Factors a symmetric positive definite matrix.
    pub fn factor(a: &CsrMatrix, perm: &[usize]) -> Result<Self> {
        Self::factor_impl(a, perm, false)
    }

    /// Factors a symmetric positive semidefinite matrix whose kernel is at most
    /// one-dimensional and spanned by a vector with no zero entries.
    pub fn factor_semidefinite(a: &CsrMatrix, perm: &[usize]) -> Result<Self> {
        Self::factor_impl(a, perm, true)
    }

    fn factor_impl(a: &CsrMatrix, perm: &[usize], allow_null: bool) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        assert_eq!(perm.len(), n);
        let mut inv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (k, &p) in perm.iter().enumerate() {
            for (j, _) in a.row(p) {
                let jj = inv[j];
                if jj < first[k] {
                    first[k] = jj;
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offset[n]];
        let mut diag_scale = vec![0.0; n];
        for (k, &p) in perm.iter().enumerate() {
            for (j, v) in a.row(p) {
                let jj = inv[j];
                if jj <= k {
                    data[offset[k] + (jj - first[k])] += v;
                }
                if jj == k {
                    diag_scale[k] = v.abs();
                }
            }
        }

        let mut null_pivot = None;
        for i in 0..n {
            let fi = first[i];
            let row_i = offset[i];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let row_j = offset[j];
                let mut s = data[row_i + (j - fi)];
                for k in start..j {
                    s -= data[row_i + (k - fi)] * data[row_j + (k - fj)];
                }
                let djj = data[row_j + (j - fj)];
                data[row_i + (j - fi)] = if djj == 0.0 { 0.0 } else { s / djj };
            }
            let mut d = data[row_i + (i - fi)];
            for k in fi..i {
                let l = data[row_i + (k - fi)];
                d -= l * l;
            }
            let threshold = 1e-10 * diag_scale[i].max(f64::MIN_POSITIVE);
            if d <= threshold {
                if allow_null && i == n - 1 && null_pivot.is_none() {
                    null_pivot = Some(i);
                    data[row_i + (i - fi)] = 0.0;
                    continue;
                }
                return Err(Error::Singular(format!(
                    "non-positive pivot {d:e} at elimination step {i} of {n}"
                )));
            }
            data[row_i + (i - fi)] = d.sqrt();
        }

        Ok(EnvelopeCholesky { n, perm: perm.to_vec(), first, offset, data, null_pivot })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_semidefinite(&self) -> bool {
        self.null_pivot.is_some()
    }

    pub fn stored_entries(&self) -> usize {
        self.data.len()
    }

    /// Solves `A x = b` in place. For a semidefinite factor the returned `x`
    /// solves the system up to an element of the kernel.
    pub fn solve_in_place(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let n = self.n;
        assert_eq!(b.len(), n);
        work.clear();
        work.extend(self.perm.iter().map(|&p| b[p]));
        let y = work.as_mut_slice();

        for i in 0..n {
            if Some(i) == self.null_pivot {
                y[i] = 0.0;
                continue;
            }
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for (k, l) in (fi..i).zip(row) {
                s -= l * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            if Some(i) == self.null_pivot {
                y[i] = 0.0;
                continue;
            }
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let xi = y[i] / row[i - fi];
            y[i] = xi;
            for (k, l) in (fi..i).zip(row) {
                y[k] -= l * xi;
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = y[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let mut work = Vec::with_capacity(self.n);
        self.solve_in_place(&mut x, &mut work);
        x
    }
}
