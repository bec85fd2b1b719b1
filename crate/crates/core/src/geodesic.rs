//! Discrete Wasserstein geodesics, distances and the induced tangent norm.
//!
//! The dual potential `phi` lives on the staggered time grid, the densities
//! `mu` (the multipliers of the Hamilton-Jacobi constraint) on the centered
//! grid. Each centered time has two copy groups, the face gradients at the
//! staggered times just before and just after it, each with weight 1/2.

use serde::{Deserialize, Serialize};

use crate::admm::{split_primal, Admm, ConstraintRow, CopyGroup, Layout, Problem, ResidualRecord, Solution};
use crate::error::{Error, Result};
use crate::mesh::{average_to_faces, mass, solve_mean_zero, DensityField, MeshOperators, TriangleMesh};
use crate::timegrid::{CenteredField, StaggeredField, TimeField};

pub use crate::admm::{update_penalty, SolverConfig};

/// Faces whose averaged density is below `VACUUM / |f|` carry no velocity.
pub const VACUUM: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicResult {
    /// Densities at the centered times, `N x |V|`.
    pub mu_curve: Vec<Vec<f64>>,
    /// Potential at the staggered times, `(N + 1) x |V|`.
    pub phi: Vec<Vec<f64>>,
    /// Per-face momentum at the centered times, `N x |T|`.
    pub momentum: Vec<Vec<[f64; 3]>>,
    pub distance: f64,
    pub dual_objective: f64,
    pub primal_action: f64,
    /// `|primal - dual| / max(dual, eps)`
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<ResidualRecord>,
    pub final_penalty: f64,
}

impl GeodesicResult {
    pub fn mu_field(&self) -> CenteredField {
        TimeField::from_rows(self.mu_curve.clone()).expect("rectangular curve")
    }

    pub fn phi_field(&self) -> StaggeredField {
        TimeField::from_rows(self.phi.clone()).expect("rectangular potential")
    }

    /// Density at the centered time closest to `t = 1/2` (the exact middle
    /// for odd `N`).
    pub fn midpoint(&self) -> &[f64] {
        &self.mu_curve[(self.mu_curve.len() - 1) / 2]
    }
}

pub(crate) fn check_density(mesh: &TriangleMesh, mu: &DensityField, name: &str) -> Result<()> {
    if mu.len() != mesh.num_vertices() {
        return Err(Error::SizeMismatch { expected: mesh.num_vertices(), got: mu.len() });
    }
    if let Some(i) = mu.values().iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidDensity(format!("{name}: entry {i} is {}", mu.values()[i])));
    }
    let total = mu.mass(mesh);
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDensity(format!("{name} has mass {total}, expected 1")));
    }
    Ok(())
}

/// Constraint layout of the time discretization with `n` centered steps.
pub(crate) fn time_layout(n: usize) -> Layout {
    let tau = 1.0 / n as f64;
    let rows = (0..n)
        .map(|t| ConstraintRow {
            weight: tau,
            derivative: vec![(t, -1.0 / tau), (t + 1, 1.0 / tau)],
            groups: vec![
                CopyGroup { stag: vec![t], rho: 0.5 },
                CopyGroup { stag: vec![t + 1], rho: 0.5 },
            ],
        })
        .collect();
    Layout { n_stag: n + 1, dim: 1, rows }
}

fn geodesic_problem<'a>(
    mesh: &'a TriangleMesh,
    ops: &'a MeshOperators,
    mu0: &DensityField,
    mu1: &DensityField,
    n: usize,
) -> Problem<'a> {
    let nv = mesh.num_vertices();
    let areas = mesh.vertex_areas();
    let mut linear = vec![0.0; (n + 1) * nv];
    for v in 0..nv {
        linear[v] = -areas[v] * mu0.values()[v];
        linear[n * nv + v] = areas[v] * mu1.values()[v];
    }
    Problem { mesh, ops, layout: time_layout(n), linear, terminal: None, remove_mean: true }
}

/// Geodesic between two densities by ADMM on the discrete dual problem.
///
/// Non-convergence is not an error: the last iterate is returned with
/// `converged == false`.
pub fn solve_geodesic(
    mesh: &TriangleMesh,
    ops: &MeshOperators,
    mu0: &DensityField,
    mu1: &DensityField,
    cfg: &SolverConfig,
) -> Result<GeodesicResult> {
    cfg.validate()?;
    check_density(mesh, mu0, "mu0")?;
    check_density(mesh, mu1, "mu1")?;
    let n = cfg.time_steps;
    let admm = Admm::new(geodesic_problem(mesh, ops, mu0, mu1, n), *cfg)?;
    let sol = admm.solve()?;
    Ok(finish(mesh, n, cfg.alpha, sol))
}

/// `W_d(mu0, mu1)`; see [`solve_geodesic`].
pub fn distance(
    mesh: &TriangleMesh,
    ops: &MeshOperators,
    mu0: &DensityField,
    mu1: &DensityField,
    cfg: &SolverConfig,
) -> Result<f64> {
    Ok(solve_geodesic(mesh, ops, mu0, mu1, cfg)?.distance)
}

fn finish(mesh: &TriangleMesh, n: usize, alpha: f64, sol: Solution) -> GeodesicResult {
    let nv = mesh.num_vertices();
    let tau = 1.0 / n as f64;
    let mu_curve: Vec<Vec<f64>> = sol.mu.chunks(nv).map(<[f64]>::to_vec).collect();
    let phi: Vec<Vec<f64>> = sol.phi.chunks(nv).map(<[f64]>::to_vec).collect();
    let momentum = face_momentum(mesh, &sol.m, n);
    let mut primal = split_primal(mesh, &time_layout(n), &sol.mu, &sol.m, &sol.row_offsets);
    if alpha > 0.0 {
        let congestion: f64 = mu_curve
            .iter()
            .map(|row| row.iter().zip(mesh.vertex_areas()).map(|(m, a)| a * m * m).sum::<f64>())
            .sum();
        primal += 0.5 * alpha * tau * congestion;
    }
    let dual = sol.objective;
    let gap = (primal - dual).abs() / dual.abs().max(1e-12);
    GeodesicResult {
        mu_curve,
        phi,
        momentum,
        distance: dual.max(0.0).sqrt(),
        dual_objective: dual,
        primal_action: primal,
        gap,
        iterations: sol.iterations,
        converged: sol.converged,
        history: sol.history,
        final_penalty: sol.penalty,
    }
}

/// Combines the duplicated momentum multipliers into one vector per face and
/// centered time.
///
/// Each of the six copies of a face (two neighbouring staggered times, three
/// corners) carries half the face area as weight, so the face momentum is
/// three times their mean.
pub fn face_momentum(mesh: &TriangleMesh, m: &[f64], n: usize) -> Vec<Vec<[f64; 3]>> {
    let nt = mesh.num_faces();
    assert_eq!(m.len(), n * 2 * nt * 9, "momentum copies have the wrong length");
    (0..n)
        .map(|t| {
            (0..nt)
                .map(|f| {
                    let mut acc = [0.0; 3];
                    for i in 0..2 {
                        let base = ((t * 2 + i) * nt + f) * 9;
                        for corner in 0..3 {
                            for c in 0..3 {
                                acc[c] += m[base + corner * 3 + c];
                            }
                        }
                    }
                    [acc[0] / 2.0, acc[1] / 2.0, acc[2] / 2.0]
                })
                .collect()
        })
        .collect()
}

/// `v = m / mu_hat` per face, zero where the face density is below
/// `threshold / |f|`.
pub fn reconstruct_velocity(
    mesh: &TriangleMesh,
    momentum: &[Vec<[f64; 3]>],
    mu_curve: &[Vec<f64>],
    threshold: f64,
) -> Vec<Vec<[f64; 3]>> {
    momentum
        .iter()
        .zip(mu_curve)
        .map(|(mt, mu)| {
            let mu_hat = average_to_faces(mesh, mu);
            mt.iter()
                .zip(&mu_hat)
                .zip(mesh.face_areas())
                .map(|((p, &d), &area)| {
                    if d < threshold / area {
                        [0.0; 3]
                    } else {
                        [p[0] / d, p[1] / d, p[2] / d]
                    }
                })
                .collect()
        })
        .collect()
}

/// Kinetic action `tau sum_t sum_f |f| mu_hat |v|^2 / 2`.
pub fn evaluate_action(
    mesh: &TriangleMesh,
    mu_curve: &[Vec<f64>],
    momentum: &[Vec<[f64; 3]>],
    tau: f64,
) -> f64 {
    let vel = reconstruct_velocity(mesh, momentum, mu_curve, VACUUM);
    let mut total = 0.0;
    for (vt, mu) in vel.iter().zip(mu_curve) {
        let mu_hat = average_to_faces(mesh, mu);
        for ((v, d), area) in vt.iter().zip(&mu_hat).zip(mesh.face_areas()) {
            total += 0.5 * area * d * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        }
    }
    tau * total
}

/// Squared tangent norm `|delta|^2_{T_mu}`: solves
/// `(G^T M_T M_mu_hat G) phi = -M_V delta` for mean-zero `phi` and returns
/// `sum_f |f| mu_hat_f |(G phi)_f|^2 / 2`.
pub fn tangent_norm_squared(
    mesh: &TriangleMesh,
    ops: &MeshOperators,
    mu: &[f64],
    delta: &[f64],
) -> Result<f64> {
    let nv = mesh.num_vertices();
    if !mesh.is_connected() {
        return Err(Error::Disconnected);
    }
    if mu.len() != nv || delta.len() != nv {
        return Err(Error::SizeMismatch { expected: nv, got: mu.len().min(delta.len()) });
    }
    if let Some(v) = mu.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::InvalidDensity(format!("tangent norm needs mu > 0, vertex {v} has {}", mu[v])));
    }
    let scale: f64 = delta.iter().zip(mesh.vertex_areas()).map(|(d, a)| (d * a).abs()).sum();
    if mass(mesh, delta).abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::InvalidDensity("tangent vector must have zero mass".into()));
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mu_hat = average_to_faces(mesh, mu);
    let k = ops.weighted_laplacian(mesh, &mu_hat);
    let rhs: Vec<f64> = delta.iter().zip(mesh.vertex_areas()).map(|(d, a)| -d * a).collect();
    let phi = solve_mean_zero(mesh, &k, ops.ordering(), &rhs)?;
    let grads = ops.gradient(mesh, &phi);
    Ok(0.5
        * grads
            .iter()
            .zip(&mu_hat)
            .zip(mesh.face_areas())
            .map(|((g, d), a)| a * d * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]))
            .sum::<f64>())
}

pub fn tangent_norm(mesh: &TriangleMesh, ops: &MeshOperators, mu: &[f64], delta: &[f64]) -> Result<f64> {
    Ok(tangent_norm_squared(mesh, ops, mu, delta)?.sqrt())
}

/// Dual update `mu <- mu - r (A - D phi)`, `m <- m - r (B - Gt phi)` for
/// explicitly given constraint values.
pub fn dual_update(sigma: &mut [f64], q: &[f64], lambda_phi: &[f64], r: f64) {
    for ((s, q), l) in sigma.iter_mut().zip(q).zip(lambda_phi) {
        *s -= r * (q - l);
    }
}

#[doc(hidden)]
pub mod internals {
    //! Pieces of the solver exposed for testing against independent oracles.
    use super::*;
    use crate::spacetime::KroneckerSystem;

    pub struct PhiUpdate<'a> {
        admm: Admm<'a>,
        system: KroneckerSystem,
    }

    impl<'a> PhiUpdate<'a> {
        pub fn new(
            mesh: &'a TriangleMesh,
            ops: &'a MeshOperators,
            mu0: &DensityField,
            mu1: &DensityField,
            n: usize,
        ) -> Result<Self> {
            let cfg = SolverConfig { time_steps: n, ..SolverConfig::default() };
            let admm = Admm::new(geodesic_problem(mesh, ops, mu0, mu1, n), cfg)?;
            let system = admm.system_for(1.0)?;
            Ok(PhiUpdate { admm, system })
        }

        /// Length of the `B` / `m` copy arrays.
        pub fn copies_len(&self) -> usize {
            self.admm.copies_len()
        }

        pub fn solve(&self, r: f64, mu: &[f64], a: &[f64], m: &[f64], b: &[f64]) -> Vec<f64> {
            self.admm.phi_update(&self.system, r, mu, a, m, b, &[], &[])
        }
    }
}
