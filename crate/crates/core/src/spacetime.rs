//! Solver for the space-time systems `(T_a (x) M + T_b (x) L) X = R`.
//!
//! `T_a` is a small dense symmetric positive semidefinite matrix acting on the
//! "time-like" index, `T_b` a positive diagonal, `M` the lumped vertex mass
//! and `L` the cotangent Laplacian. The generalized eigendecomposition
//! `T_a U = T_b U diag(lambda)`, `U^T T_b U = I` decouples the system into one
//! sparse solve `(lambda_k M + L) Y_k = (U^T R)_k` per mode; each mode matrix
//! is factored once.
//!
//! Modes with `lambda_k = 0` carry the constant kernel of `L`; they are
//! solved on the mean-zero complement, so the returned `X` is the solution
//! with no component along `ker T_a (x) 1`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, EnvelopeCholesky};

#[derive(Debug, Clone)]
pub struct KroneckerSystem {
    nt: usize,
    nv: usize,
    /// `U`, row-major `nt x nt`
    u: Vec<f64>,
    lambda: Vec<f64>,
    factors: Vec<EnvelopeCholesky>,
    mass: Vec<f64>,
    ta: Vec<f64>,
    tb: Vec<f64>,
    laplacian: CsrMatrix,
}

impl KroneckerSystem {
    /// `ta` is row-major `nt x nt`, `tb` has `nt` positive entries.
    pub fn new(
        ta: &[f64],
        tb: &[f64],
        mass: &[f64],
        laplacian: &CsrMatrix,
        ordering: &[usize],
    ) -> Result<Self> {
        let nt = tb.len();
        let nv = mass.len();
        assert_eq!(ta.len(), nt * nt);
        if let Some(k) = tb.iter().position(|&b| !(b > 0.0)) {
            return Err(Error::Singular(format!("time weight {k} is not positive")));
        }
        let scale: Vec<f64> = tb.iter().map(|b| 1.0 / b.sqrt()).collect();
        let s = DMatrix::from_fn(nt, nt, |i, j| {
            0.5 * (ta[i * nt + j] + ta[j * nt + i]) * scale[i] * scale[j]
        });
        let eig = SymmetricEigen::new(s);
        let max_lambda = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let cutoff = 1e-10 * max_lambda.max(f64::MIN_POSITIVE);
        let lambda: Vec<f64> =
            eig.eigenvalues.iter().map(|&l| if l <= cutoff { 0.0 } else { l }).collect();
        let mut u = vec![0.0; nt * nt];
        for i in 0..nt {
            for k in 0..nt {
                u[i * nt + k] = scale[i] * eig.eigenvectors[(i, k)];
            }
        }

        let factors = lambda
            .par_iter()
            .map(|&l| {
                if l == 0.0 {
                    EnvelopeCholesky::factor_semidefinite(laplacian, ordering)
                        .map_err(|_| Error::Disconnected)
                } else {
                    EnvelopeCholesky::factor(&laplacian.shifted(l, mass, 1.0), ordering)
                }
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(KroneckerSystem {
            nt,
            nv,
            u,
            lambda,
            factors,
            mass: mass.to_vec(),
            ta: ta.to_vec(),
            tb: tb.to_vec(),
            laplacian: laplacian.clone(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nt, self.nv)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    /// Solves `K X = R` in place; `x` is row-major `nt x nv`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (nt, nv) = (self.nt, self.nv);
        assert_eq!(x.len(), nt * nv);

        // Y = U^T R
        let mut y = vec![0.0; nt * nv];
        y.par_chunks_mut(nv).enumerate().for_each(|(k, yk)| {
            for i in 0..nt {
                let c = self.u[i * nt + k];
                if c != 0.0 {
                    axpy(c, &x[i * nv..(i + 1) * nv], yk);
                }
            }
        });

        y.par_chunks_mut(nv).enumerate().for_each_init(Vec::new, |work, (k, yk)| {
            if self.lambda[k] == 0.0 {
                // project the right-hand side onto the range of L
                let mean = yk.iter().sum::<f64>() / nv as f64;
                yk.iter_mut().for_each(|v| *v -= mean);
                self.factors[k].solve_in_place(yk, work);
                let total: f64 = self.mass.iter().sum();
                let shift = yk.iter().zip(&self.mass).map(|(a, b)| a * b).sum::<f64>() / total;
                yk.iter_mut().for_each(|v| *v -= shift);
            } else {
                self.factors[k].solve_in_place(yk, work);
            }
        });

        // X = U Y
        x.par_chunks_mut(nv).enumerate().for_each(|(i, xi)| {
            xi.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..nt {
                let c = self.u[i * nt + k];
                if c != 0.0 {
                    axpy(c, &y[k * nv..(k + 1) * nv], xi);
                }
            }
        });
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let mut x = r.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `K X`, used for residual checks.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (nt, nv) = (self.nt, self.nv);
        let lx: Vec<Vec<f64>> = (0..nt).map(|i| self.laplacian.mul_vec(&x[i * nv..(i + 1) * nv])).collect();
        let mut out = vec![0.0; nt * nv];
        for i in 0..nt {
            let oi = &mut out[i * nv..(i + 1) * nv];
            for j in 0..nt {
                let a = self.ta[i * nt + j];
                if a != 0.0 {
                    for ((o, xv), m) in oi.iter_mut().zip(&x[j * nv..(j + 1) * nv]).zip(&self.mass) {
                        *o += a * m * xv;
                    }
                }
            }
            axpy(self.tb[i], &lx[i], oi);
        }
        out
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Graph Laplacian of the path on `n` nodes, dense row-major.
pub fn path_laplacian(n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n.saturating_sub(1) {
        a[i * n + i] += 1.0;
        a[(i + 1) * n + i + 1] += 1.0;
        a[i * n + i + 1] -= 1.0;
        a[(i + 1) * n + i] -= 1.0;
    }
    a
}
