//! Alternating direction method of multipliers for the discrete dual
//! transport problems.
//!
//! All solvers in this crate share one structure. A potential `phi` has one
//! row of vertex values per "staggered" index `s` (a staggered time for
//! geodesics, a cell component for harmonic maps). Constraints live on
//! "centered" rows `x`, one per vertex `v` of the target mesh:
//!
//! ```text
//! (D phi)_x,v + sum_g sum_{(f,v) in T_v} kappa |(G phi_g)_f|^2 <= 0
//! ```
//!
//! where `D` mixes staggered rows, `G` is the mesh gradient and each copy
//! group `g` of row `x` collects the rows whose gradients enter the
//! constraint. The splitting introduces `q = (A, B) = Lambda phi` with one
//! copy of every face gradient per incident vertex, so the constraint set is
//! a product of small paraboloids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{MeshOperators, TriangleMesh};
use crate::projection::{project, BlockWeights};
use crate::spacetime::KroneckerSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of centered time steps (ignored by the harmonic solver).
    pub time_steps: usize,
    /// Initial penalty; `None` uses the inverse of the surface area.
    pub initial_penalty: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    /// Congestion weight; zero is plain transport.
    pub alpha: f64,
    pub penalty_adapt: bool,
    pub adapt_interval: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_steps: 31,
            initial_penalty: None,
            tol: 1e-4,
            max_iters: 5000,
            alpha: 0.0,
            penalty_adapt: true,
            adapt_interval: 20,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.time_steps == 0 {
            return bad("time_steps must be positive");
        }
        if let Some(r) = self.initial_penalty {
            if !(r > 0.0 && r.is_finite()) {
                return bad("initial penalty must be positive");
            }
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be nonnegative");
        }
        if self.adapt_interval == 0 {
            return bad("adapt_interval must be positive");
        }
        Ok(())
    }
}

/// Residual-balancing rule: double `r` when the primal residual dominates by
/// more than 10x, halve it in the opposite case.
///
/// Multipliers are stored unscaled, so nothing else changes with `r`.
pub fn update_penalty(r: f64, primal: f64, dual: f64) -> f64 {
    if primal > 10.0 * dual {
        2.0 * r
    } else if dual > 10.0 * primal {
        0.5 * r
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct CopyGroup {
    /// Staggered row of each component; all groups share the same length.
    pub stag: Vec<usize>,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub weight: f64,
    /// `(D phi)_x = sum (s, c) c * phi_s`
    pub derivative: Vec<(usize, f64)>,
    pub groups: Vec<CopyGroup>,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub n_stag: usize,
    pub dim: usize,
    pub rows: Vec<ConstraintRow>,
}

/// Per-vertex convex function `h_v` of a free endpoint density.
pub trait EndpointFunction: Sync {
    /// `argmin_u r h_v(u) + (u - x)^2 / 2`
    fn prox(&self, v: usize, x: f64, r: f64) -> f64;
    /// `sup_u (p u - h_v(u))`
    fn conjugate(&self, v: usize, p: f64) -> f64;
}

/// Free endpoint at staggered row `stag`: the objective gets
/// `-sum_v |v| h_v^*(-phi_stag,v)` instead of a fixed pairing.
pub struct Terminal<'a> {
    pub stag: usize,
    pub function: &'a dyn EndpointFunction,
}

pub struct Problem<'a> {
    pub mesh: &'a TriangleMesh,
    pub ops: &'a MeshOperators,
    pub layout: Layout,
    /// Euclidean gradient of the linear part of the objective, `n_stag x |V|`.
    pub linear: Vec<f64>,
    pub terminal: Option<Terminal<'a>>,
    /// Subtract the global mean of `phi` after every solve.
    pub remove_mean: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub a: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Momentum multipliers, same layout as `b`.
    pub m: Vec<f64>,
    pub b: Vec<f64>,
    pub row_offsets: Vec<usize>,
    pub nu: Vec<f64>,
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<ResidualRecord>,
    pub penalty: f64,
}

pub struct Admm<'a> {
    p: Problem<'a>,
    cfg: SolverConfig,
    nv: usize,
    nt: usize,
    row_offsets: Vec<usize>,
    /// `sum_x w_x D_xs D_xt`, dense
    ta_transport: Vec<f64>,
    tb: Vec<f64>,
}

impl<'a> Admm<'a> {
    pub fn new(problem: Problem<'a>, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        // mass cannot move between components, and the normal operator
        // would have one null direction per component
        if !problem.mesh.is_connected() {
            return Err(Error::Disconnected);
        }
        let nv = problem.mesh.num_vertices();
        let nt = problem.mesh.num_faces();
        let ns = problem.layout.n_stag;
        let dim = problem.layout.dim;
        if problem.linear.len() != ns * nv {
            return Err(Error::SizeMismatch { expected: ns * nv, got: problem.linear.len() });
        }
        let mut ta = vec![0.0; ns * ns];
        let mut tb = vec![0.0; ns];
        let mut row_offsets = Vec::with_capacity(problem.layout.rows.len() + 1);
        row_offsets.push(0);
        for row in &problem.layout.rows {
            for &(s, c) in &row.derivative {
                for &(t, d) in &row.derivative {
                    ta[s * ns + t] += row.weight * c * d;
                }
            }
            for g in &row.groups {
                assert_eq!(g.stag.len(), dim);
                for &s in &g.stag {
                    // three corner copies of every face gradient
                    tb[s] += 3.0 * row.weight * g.rho;
                }
            }
            let len = row.groups.len() * nt * 3 * 3 * dim;
            row_offsets.push(row_offsets.last().unwrap() + len);
        }
        if let Some(term) = &problem.terminal {
            if term.stag >= ns {
                return Err(Error::InvalidConfig("terminal row out of range".into()));
            }
        }
        Ok(Admm { p: problem, cfg, nv, nt, row_offsets, ta_transport: ta, tb })
    }

    fn n_rows(&self) -> usize {
        self.p.layout.rows.len()
    }

    pub(crate) fn copies_len(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    pub(crate) fn system_for(&self, r: f64) -> Result<KroneckerSystem> {
        let ns = self.p.layout.n_stag;
        let beta = 1.0 / (1.0 + self.cfg.alpha * r);
        let mut ta: Vec<f64> = self.ta_transport.iter().map(|a| beta * a).collect();
        if let Some(term) = &self.p.terminal {
            ta[term.stag * ns + term.stag] += 1.0;
        }
        KroneckerSystem::new(
            &ta,
            &self.tb,
            self.p.mesh.vertex_areas(),
            self.p.ops.laplacian(),
            self.p.ops.ordering(),
        )
    }

    /// `D phi`, centered rows.
    fn derivative(&self, phi: &[f64]) -> Vec<f64> {
        let nv = self.nv;
        let mut out = vec![0.0; self.n_rows() * nv];
        out.par_chunks_mut(nv).zip(&self.p.layout.rows).for_each(|(o, row)| {
            for &(s, c) in &row.derivative {
                for (ov, pv) in o.iter_mut().zip(&phi[s * nv..(s + 1) * nv]) {
                    *ov += c * pv;
                }
            }
        });
        out
    }

    /// Face gradients of every staggered row, `(s * |T| + f) * 3 + c`.
    fn gradients(&self, phi: &[f64]) -> Vec<f64> {
        let (nv, nt) = (self.nv, self.nt);
        let mut out = vec![0.0; self.p.layout.n_stag * nt * 3];
        out.par_chunks_mut(nt * 3).enumerate().for_each(|(s, o)| {
            self.p.ops.gradient_into(self.p.mesh, &phi[s * nv..(s + 1) * nv], o);
        });
        out
    }

    /// `beta D^* a + Gt^* s` accumulated into `out` (`n_stag x |V|`), with `s`
    /// given per row as corner sums `(g * |T| + f) * 3dim + comp * 3 + c`.
    fn adjoint_add(&self, a: &[f64], sums: &[Vec<f64>], beta: f64, out: &mut [f64]) {
        let (nv, nt) = (self.nv, self.nt);
        let ns = self.p.layout.n_stag;
        let dim = self.p.layout.dim;
        let areas_v = self.p.mesh.vertex_areas();
        let areas_f = self.p.mesh.face_areas();

        // per staggered row face field, reduced in row order for determinism
        let mut face_field = vec![0.0; ns * nt * 3];
        for (x, row) in self.p.layout.rows.iter().enumerate() {
            let ax = &a[x * nv..(x + 1) * nv];
            for &(s, c) in &row.derivative {
                let w = beta * row.weight * c;
                for ((o, av), m) in out[s * nv..(s + 1) * nv].iter_mut().zip(ax).zip(areas_v) {
                    *o += w * m * av;
                }
            }
            let sx = &sums[x];
            for (g, grp) in row.groups.iter().enumerate() {
                let w = row.weight * grp.rho;
                for (comp, &s) in grp.stag.iter().enumerate() {
                    let dst = &mut face_field[s * nt * 3..(s + 1) * nt * 3];
                    for f in 0..nt {
                        let src = &sx[(g * nt + f) * 3 * dim + comp * 3..][..3];
                        let wf = w * areas_f[f];
                        for c in 0..3 {
                            dst[f * 3 + c] += wf * src[c];
                        }
                    }
                }
            }
        }
        out.par_chunks_mut(nv).enumerate().for_each(|(s, o)| {
            let field = &face_field[s * nt * 3..(s + 1) * nt * 3];
            self.p.ops.gradient_transpose_add(self.p.mesh, field, o);
        });
    }

    /// One `phi` update: solves `r K phi = grad F + beta D^*(r A - mu) + Gt^*(r B - m) + P^*(r z - nu)`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn phi_update(
        &self,
        system: &KroneckerSystem,
        r: f64,
        mu: &[f64],
        a: &[f64],
        m: &[f64],
        b: &[f64],
        nu: &[f64],
        z: &[f64],
    ) -> Vec<f64> {
        let nv = self.nv;
        let beta = 1.0 / (1.0 + self.cfg.alpha * r);
        let mut rhs = self.p.linear.clone();
        let a_part: Vec<f64> = a.iter().zip(mu).map(|(a, mu)| r * a - mu).collect();
        let sums = self.corner_sums(|i| r * b[i] - m[i]);
        self.adjoint_add(&a_part, &sums, beta, &mut rhs);
        if let Some(term) = &self.p.terminal {
            // P phi = -phi_stag, so P^* y = -M y
            let areas = self.p.mesh.vertex_areas();
            for v in 0..nv {
                rhs[term.stag * nv + v] -= areas[v] * (r * z[v] - nu[v]);
            }
        }
        rhs.iter_mut().for_each(|x| *x /= r);
        system.solve_in_place(&mut rhs);
        if self.p.remove_mean {
            let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
            rhs.iter_mut().for_each(|x| *x -= mean);
        }
        rhs
    }

    /// Sums over the three corner copies of each `(row, group, face, comp)`.
    fn corner_sums(&self, value: impl Fn(usize) -> f64 + Sync) -> Vec<Vec<f64>> {
        let nt = self.nt;
        let dim3 = 3 * self.p.layout.dim;
        (0..self.n_rows())
            .into_par_iter()
            .map(|x| {
                let base = self.row_offsets[x];
                let ng = self.p.layout.rows[x].groups.len();
                let mut out = vec![0.0; ng * nt * dim3];
                for gf in 0..ng * nt {
                    let dst = &mut out[gf * dim3..(gf + 1) * dim3];
                    for corner in 0..3 {
                        let src = base + (gf * 3 + corner) * dim3;
                        for (k, d) in dst.iter_mut().enumerate() {
                            *d += value(src + k);
                        }
                    }
                }
                out
            })
            .collect()
    }

    pub fn solve(&self) -> Result<Solution> {
        let nv = self.nv;
        let nt = self.nt;
        let ns = self.p.layout.n_stag;
        let nrows = self.n_rows();
        let dim = self.p.layout.dim;
        let dim3 = 3 * dim;
        let alpha = self.cfg.alpha;
        let mesh = self.p.mesh;
        let areas_v = mesh.vertex_areas();
        let areas_f = mesh.face_areas();

        let mut r = self.cfg.initial_penalty.unwrap_or(1.0 / mesh.total_area());
        let mut system = self.system_for(r)?;
        let mut system_r = r;

        let ncopies = *self.row_offsets.last().unwrap();
        let mut phi = vec![0.0; ns * nv];
        let mut mu = vec![0.0; nrows * nv];
        let mut a = vec![0.0; nrows * nv];
        let mut lambda = vec![0.0; nrows * nv];
        let mut m = vec![0.0; ncopies];
        let mut b = vec![0.0; ncopies];
        let mut nu = vec![0.0; nv];
        let mut z = vec![0.0; nv];
        let mut history = Vec::new();
        let mut converged = false;
        let mut iterations = 0;

        for it in 1..=self.cfg.max_iters {
            iterations = it;
            if alpha > 0.0 && r != system_r {
                system = self.system_for(r)?;
                system_r = r;
            }
            phi = self.phi_update(&system, r, &mu, &a, &m, &b, &nu, &z);
            let dphi = self.derivative(&phi);
            let gphi = self.gradients(&phi);

            if alpha > 0.0 {
                let c = alpha / (1.0 + alpha * r);
                lambda.par_iter_mut().enumerate().for_each(|(i, l)| {
                    *l = c * (mu[i] - r * (a[i] - dphi[i]));
                });
            }

            // pointwise projections and multiplier updates, one task per row
            let rows = &self.p.layout.rows;
            let offsets = &self.row_offsets;
            let (b_chunks, m_chunks) = split_rows(&mut b, &mut m, offsets);
            let results: Vec<Result<RowStats>> = a
                .par_chunks_mut(nv)
                .zip(mu.par_chunks_mut(nv))
                .zip(b_chunks.into_par_iter().zip(m_chunks))
                .enumerate()
                .map(|(x, ((ax, mux), (bx, mx)))| {
                    let row = &rows[x];
                    let ng = row.groups.len();
                    let mut stats = RowStats { primal: 0.0, da: vec![0.0; nv], ds: vec![0.0; ng * nt * dim3] };
                    let mut weights: Vec<BlockWeights> = Vec::new();
                    let mut buf: Vec<f64> = Vec::new();
                    let mut norms = Vec::new();
                    for v in 0..nv {
                        let inc = mesh.vertex_faces(v);
                        let target = dphi[x * nv + v] - lambda[x * nv + v];
                        let a_tilde = target + mux[v] / r;
                        weights.clear();
                        buf.clear();
                        for (g, grp) in row.groups.iter().enumerate() {
                            for &(f, corner) in inc {
                                let w = grp.rho * areas_f[f];
                                weights.push(BlockWeights { beta: w, kappa: w / (6.0 * areas_v[v]) });
                                let at = ((g * nt + f) * 3 + corner) * dim3;
                                for (comp, &s) in grp.stag.iter().enumerate() {
                                    for c in 0..3 {
                                        buf.push(gphi[(s * nt + f) * 3 + c] + mx[at + comp * 3 + c] / r);
                                    }
                                }
                            }
                        }
                        let proj = project(a_tilde, areas_v[v], &weights, &mut buf, dim3, &mut norms)?;
                        let wa = row.weight * areas_v[v];
                        stats.primal += wa * (proj.a - target).powi(2);
                        stats.da[v] = proj.a - ax[v];
                        ax[v] = proj.a;
                        mux[v] = r * (a_tilde - proj.a);
                        let mut k = 0;
                        for (g, grp) in row.groups.iter().enumerate() {
                            for &(f, corner) in inc {
                                let at = ((g * nt + f) * 3 + corner) * dim3;
                                let wb = row.weight * grp.rho * areas_f[f];
                                let ds = &mut stats.ds[(g * nt + f) * dim3..][..dim3];
                                for (comp, &s) in grp.stag.iter().enumerate() {
                                    for c in 0..3 {
                                        let i = comp * 3 + c;
                                        let new_b = buf[k + i];
                                        let g_val = gphi[(s * nt + f) * 3 + c];
                                        let tilde = g_val + mx[at + i] / r;
                                        stats.primal += wb * (new_b - g_val).powi(2);
                                        ds[i] += new_b - bx[at + i];
                                        bx[at + i] = new_b;
                                        mx[at + i] = r * (tilde - new_b);
                                    }
                                }
                                k += dim3;
                            }
                        }
                    }
                    Ok(stats)
                })
                .collect();

            let mut primal_sq = 0.0;
            let mut da = vec![0.0; nrows * nv];
            let mut ds = Vec::with_capacity(nrows);
            for (x, res) in results.into_iter().enumerate() {
                let st = res?;
                primal_sq += st.primal;
                da[x * nv..(x + 1) * nv].copy_from_slice(&st.da);
                ds.push(st.ds);
            }

            // free endpoint
            let mut dz = vec![0.0; nv];
            if let Some(term) = &self.p.terminal {
                for v in 0..nv {
                    let pphi = -phi[term.stag * nv + v];
                    let y = pphi + nu[v] / r;
                    let u = term.function.prox(v, r * y, r);
                    let new_z = y - u / r;
                    primal_sq += areas_v[v] * (new_z - pphi).powi(2);
                    dz[v] = new_z - z[v];
                    z[v] = new_z;
                    nu[v] = u;
                }
            }

            // dual residual: r |Lambda^* W dq| measured in the K^{-1} norm
            let beta = 1.0 / (1.0 + alpha * r);
            let mut y = vec![0.0; ns * nv];
            self.adjoint_add(&da, &ds, beta, &mut y);
            if let Some(term) = &self.p.terminal {
                for v in 0..nv {
                    y[term.stag * nv + v] -= areas_v[v] * dz[v];
                }
            }
            let ky = system.solve(&y);
            let dual_sq: f64 = y.iter().zip(&ky).map(|(p, q)| p * q).sum();
            let primal = primal_sq.sqrt();
            let dual = r * dual_sq.max(0.0).sqrt();
            history.push(ResidualRecord { iteration: it, primal, dual, penalty: r });

            if primal < self.cfg.tol && dual < self.cfg.tol {
                converged = true;
                break;
            }
            if self.cfg.penalty_adapt && it % self.cfg.adapt_interval == 0 {
                r = update_penalty(r, primal, dual);
            }
        }

        let objective = self.objective(&phi, &lambda);
        Ok(Solution {
            phi,
            mu,
            a,
            lambda,
            m,
            b,
            row_offsets: self.row_offsets.clone(),
            nu,
            z,
            objective,
            iterations,
            converged,
            history,
            penalty: r,
        })
    }

    /// Dual objective at `phi`: the linear pairing, minus the congestion
    /// penalty and the endpoint conjugate.
    pub fn objective(&self, phi: &[f64], lambda: &[f64]) -> f64 {
        let nv = self.nv;
        let areas = self.p.mesh.vertex_areas();
        let mut val: f64 = self.p.linear.iter().zip(phi).map(|(c, p)| c * p).sum();
        if self.cfg.alpha > 0.0 {
            let mut pen = 0.0;
            for (x, row) in self.p.layout.rows.iter().enumerate() {
                let l = &lambda[x * nv..(x + 1) * nv];
                pen += row.weight * l.iter().zip(areas).map(|(l, a)| a * l * l).sum::<f64>();
            }
            val -= pen / (2.0 * self.cfg.alpha);
        }
        if let Some(term) = &self.p.terminal {
            for v in 0..nv {
                val -= areas[v] * term.function.conjugate(v, -phi[term.stag * nv + v]);
            }
        }
        val
    }
}

/// Primal value of the split problem, `sum 3/2 w rho |f| |m|^2 / mu` over
/// all copies, with vacuum vertices contributing nothing.
pub(crate) fn split_primal(mesh: &TriangleMesh, layout: &Layout, mu: &[f64], m: &[f64], offsets: &[usize]) -> f64 {
    let nv = mesh.num_vertices();
    let nt = mesh.num_faces();
    let dim3 = 3 * layout.dim;
    let mut total = 0.0;
    for (x, row) in layout.rows.iter().enumerate() {
        for (g, grp) in row.groups.iter().enumerate() {
            for (f, face) in mesh.faces().iter().enumerate() {
                for (corner, &v) in face.iter().enumerate() {
                    let density = mu[x * nv + v];
                    if density <= crate::geodesic::VACUUM / mesh.face_areas()[f] {
                        continue;
                    }
                    let at = offsets[x] + ((g * nt + f) * 3 + corner) * dim3;
                    let sq: f64 = m[at..at + dim3].iter().map(|a| a * a).sum();
                    total += 1.5 * row.weight * grp.rho * mesh.face_areas()[f] * sq / density;
                }
            }
        }
    }
    total
}

struct RowStats {
    primal: f64,
    da: Vec<f64>,
    ds: Vec<f64>,
}

fn split_rows<'b>(
    b: &'b mut [f64],
    m: &'b mut [f64],
    offsets: &[usize],
) -> (Vec<&'b mut [f64]>, Vec<&'b mut [f64]>) {
    let mut bs = Vec::with_capacity(offsets.len() - 1);
    let mut ms = Vec::with_capacity(offsets.len() - 1);
    let (mut b_rest, mut m_rest) = (b, m);
    for w in offsets.windows(2) {
        let len = w[1] - w[0];
        let (bh, bt) = std::mem::take(&mut b_rest).split_at_mut(len);
        let (mh, mt) = std::mem::take(&mut m_rest).split_at_mut(len);
        bs.push(bh);
        ms.push(mh);
        b_rest = bt;
        m_rest = mt;
    }
    (bs, ms)
}
