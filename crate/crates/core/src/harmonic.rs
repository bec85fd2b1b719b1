//! Harmonic maps from a parameter domain into the discrete Wasserstein space.
//!
//! The domain is a polyline (1D) or a triangle mesh (2D). The dual potential
//! is a `d`-vector per domain cell and target vertex, expressed in the cell's
//! local frame; the time derivative of the geodesic problem becomes the
//! finite element divergence at interior domain vertices, and the squared
//! target gradients are averaged over the cells around each domain vertex
//! with the same barycentric weights as on the target.
//!
//! With a polyline of `N + 1` equal cells of length `1/N` this is exactly the
//! geodesic problem with `N` time steps.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::admm::{split_primal, Admm, ConstraintRow, CopyGroup, Layout, Problem, ResidualRecord, SolverConfig};
use crate::error::{Error, Result};
use crate::geodesic::check_density;
use crate::mesh::vec3::{cross, dot, norm, scale, sub};
use crate::mesh::{read_raw, DensityField, MeshFormat, MeshOperators, TriangleMesh};

/// Simplicial parameter domain of dimension 1 or 2.
#[derive(Debug, Clone)]
pub struct DomainMesh {
    dim: usize,
    points: Vec<[f64; 3]>,
    cells: Vec<Vec<usize>>,
    cell_measures: Vec<f64>,
    vertex_measures: Vec<f64>,
    /// Per cell and local vertex, the hat-function gradient in the cell frame.
    local_gradients: Vec<Vec<Vec<f64>>>,
    /// Per cell, the orthonormal frame (`dim` ambient vectors).
    frames: Vec<Vec<[f64; 3]>>,
    boundary: Vec<bool>,
    boundary_normals: Vec<[f64; 3]>,
}

impl DomainMesh {
    pub fn from_polyline(points: Vec<[f64; 3]>, segments: &[[usize; 2]]) -> Result<Self> {
        let n = points.len();
        let mut degree = vec![0usize; n];
        for (k, s) in segments.iter().enumerate() {
            if s[0] >= n || s[1] >= n {
                return Err(Error::IndexOutOfRange { face: k, index: s[0].max(s[1]), count: n });
            }
            if s[0] == s[1] {
                return Err(Error::RepeatedVertex { face: k });
            }
            degree[s[0]] += 1;
            degree[s[1]] += 1;
        }
        if let Some(v) = degree.iter().position(|&d| d == 0) {
            return Err(Error::IsolatedVertex(v));
        }
        if let Some(v) = degree.iter().position(|&d| d > 2) {
            return Err(Error::NonManifoldEdge { a: v, b: v, count: degree[v] });
        }
        let mut cells = Vec::with_capacity(segments.len());
        let mut measures = Vec::with_capacity(segments.len());
        let mut grads = Vec::with_capacity(segments.len());
        let mut frames = Vec::with_capacity(segments.len());
        for (k, s) in segments.iter().enumerate() {
            let e = sub(points[s[1]], points[s[0]]);
            let len = norm(e);
            if !(len > 0.0) {
                return Err(Error::ZeroAreaFace { face: k, area: len });
            }
            cells.push(vec![s[0], s[1]]);
            measures.push(len);
            grads.push(vec![vec![-1.0 / len], vec![1.0 / len]]);
            frames.push(vec![scale(e, 1.0 / len)]);
        }
        let boundary: Vec<bool> = degree.iter().map(|&d| d == 1).collect();
        Self::finish(1, points, cells, measures, grads, frames, boundary)
    }

    pub fn from_surface(mesh: &TriangleMesh) -> Result<Self> {
        let ops = MeshOperators::new(mesh);
        let mut grads = Vec::with_capacity(mesh.num_faces());
        let mut frames = Vec::with_capacity(mesh.num_faces());
        for (f, basis) in mesh.face_tangent_basis().iter().enumerate() {
            let hg = ops.hat_gradients(f);
            grads.push(hg.iter().map(|g| vec![dot(*g, basis[0]), dot(*g, basis[1])]).collect());
            frames.push(vec![basis[0], basis[1]]);
        }
        let boundary = (0..mesh.num_vertices()).map(|v| mesh.is_boundary_vertex(v)).collect();
        Self::finish(
            2,
            mesh.vertices().to_vec(),
            mesh.faces().iter().map(|f| f.to_vec()).collect(),
            mesh.face_areas().to_vec(),
            grads,
            frames,
            boundary,
        )
    }

    /// OBJ files with `l` records become polylines, everything else a surface.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let format = MeshFormat::from_path(path).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("cannot infer mesh format of {}", path.display()),
        })?;
        let raw = read_raw(path, format)?;
        if raw.faces.is_empty() && !raw.segments.is_empty() {
            Self::from_polyline(raw.vertices, &raw.segments)
        } else {
            Self::from_surface(&TriangleMesh::from_raw(raw)?)
        }
    }

    fn finish(
        dim: usize,
        points: Vec<[f64; 3]>,
        cells: Vec<Vec<usize>>,
        cell_measures: Vec<f64>,
        local_gradients: Vec<Vec<Vec<f64>>>,
        frames: Vec<Vec<[f64; 3]>>,
        boundary: Vec<bool>,
    ) -> Result<Self> {
        let n = points.len();
        let mut vertex_measures = vec![0.0; n];
        for (c, cell) in cells.iter().enumerate() {
            for &x in cell {
                vertex_measures[x] += cell_measures[c] / (dim + 1) as f64;
            }
        }
        if !boundary.iter().any(|&b| b) {
            return Err(Error::InvalidConfig("the domain has no boundary".into()));
        }
        let mut domain = DomainMesh {
            dim,
            points,
            cells,
            cell_measures,
            vertex_measures,
            local_gradients,
            frames,
            boundary,
            boundary_normals: vec![[0.0; 3]; n],
        };
        domain.boundary_normals = domain.lumped_normals();
        Ok(domain)
    }

    /// Outward boundary normals lumped to vertices: half the length of each
    /// incident boundary edge times its unit normal (unit tangents at the
    /// ends of a polyline).
    fn lumped_normals(&self) -> Vec<[f64; 3]> {
        let mut out = vec![[0.0; 3]; self.points.len()];
        if self.dim == 1 {
            for cell in &self.cells {
                let (a, b) = (cell[0], cell[1]);
                let e = sub(self.points[b], self.points[a]);
                let t = scale(e, 1.0 / norm(e));
                if self.boundary[a] {
                    out[a] = scale(t, -1.0);
                }
                if self.boundary[b] {
                    out[b] = t;
                }
            }
            return out;
        }
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for cell in &self.cells {
            for k in 0..3 {
                let (a, b) = (cell[k], cell[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for cell in &self.cells {
            let p = [self.points[cell[0]], self.points[cell[1]], self.points[cell[2]]];
            let nf = cross(sub(p[1], p[0]), sub(p[2], p[0]));
            for k in 0..3 {
                let (a, b) = (cell[k], cell[(k + 1) % 3]);
                if edge_count[&(a.min(b), a.max(b))] != 1 {
                    continue;
                }
                let e = sub(p[(k + 1) % 3], p[k]);
                let mut n = cross(e, nf);
                let opposite = sub(p[(k + 2) % 3], p[k]);
                if dot(n, opposite) > 0.0 {
                    n = scale(n, -1.0);
                }
                let len = norm(e);
                let n = scale(n, 0.5 * len / norm(n));
                for v in [a, b] {
                    for c in 0..3 {
                        out[v][c] += n[c];
                    }
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.cell_measures
    }

    pub fn vertex_measures(&self) -> &[f64] {
        &self.vertex_measures
    }

    pub fn is_boundary(&self, x: usize) -> bool {
        self.boundary[x]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&x| self.boundary[x]).collect()
    }

    pub fn boundary_normals(&self) -> &[[f64; 3]] {
        &self.boundary_normals
    }

    /// `sum_c |c| grad psi_{x,c}` in ambient coordinates: the pairing of the
    /// boundary term with a constant vector field.
    pub fn integrated_gradient(&self, x: usize) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for (c, cell) in self.cells.iter().enumerate() {
            if let Some(k) = cell.iter().position(|&y| y == x) {
                for (i, e) in self.frames[c].iter().enumerate() {
                    let g = self.cell_measures[c] * self.local_gradients[c][k][i];
                    for j in 0..3 {
                        acc[j] += g * e[j];
                    }
                }
            }
        }
        acc
    }
}

/// Straight polyline of `cells` equal segments of length `h` along x.
pub fn strip_domain(cells: usize, h: f64) -> Result<DomainMesh> {
    let points = (0..=cells).map(|i| [h * i as f64, 0.0, 0.0]).collect();
    let segments: Vec<[usize; 2]> = (0..cells).map(|i| [i, i + 1]).collect();
    DomainMesh::from_polyline(points, &segments)
}

/// Equilateral triangle of side 1 split into `k^2` congruent triangles.
pub fn triangle_domain(k: usize) -> Result<DomainMesh> {
    if k == 0 {
        return Err(Error::InvalidConfig("subdivision must be positive".into()));
    }
    let mut index = HashMap::new();
    let mut points = Vec::new();
    let h = 3f64.sqrt() / 2.0;
    for j in 0..=k {
        for i in 0..=(k - j) {
            index.insert((i, j), points.len());
            points.push([(i as f64 + 0.5 * j as f64) / k as f64, h * j as f64 / k as f64, 0.0]);
        }
    }
    let mut faces = Vec::new();
    for j in 0..k {
        for i in 0..(k - j) {
            faces.push([index[&(i, j)], index[&(i + 1, j)], index[&(i, j + 1)]]);
            if i + 1 < k - j {
                faces.push([index[&(i + 1, j)], index[&(i + 1, j + 1)], index[&(i, j + 1)]]);
            }
        }
    }
    DomainMesh::from_surface(&TriangleMesh::new(points, faces)?)
}

/// One target density per boundary vertex of the domain.
#[derive(Debug, Clone, Default)]
pub struct BoundaryData {
    pub values: HashMap<usize, DensityField>,
}

impl BoundaryData {
    pub fn insert(&mut self, x: usize, mu: DensityField) {
        self.values.insert(x, mu);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonicResult {
    /// One density per domain vertex; boundary vertices carry their data.
    pub values: Vec<Vec<f64>>,
    /// Dual objective, the discrete Dirichlet energy.
    pub energy: f64,
    /// Primal value of the split problem at the final multipliers.
    pub primal_energy: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<ResidualRecord>,
}

pub fn solve_harmonic(
    domain: &DomainMesh,
    mesh: &TriangleMesh,
    ops: &MeshOperators,
    bc: &BoundaryData,
    cfg: &SolverConfig,
) -> Result<HarmonicResult> {
    cfg.validate()?;
    for x in domain.boundary_vertices() {
        let mu = bc
            .values
            .get(&x)
            .ok_or_else(|| Error::InvalidConfig(format!("no boundary density for domain vertex {x}")))?;
        check_density(mesh, mu, &format!("boundary density at {x}"))?;
    }
    let d = domain.dim;
    let nv = mesh.num_vertices();
    let areas = mesh.vertex_areas();

    // cells touching an interior vertex carry unknowns; the others stay zero
    let mut slot = vec![usize::MAX; domain.num_cells()];
    let mut n_active = 0;
    for (c, cell) in domain.cells.iter().enumerate() {
        if cell.iter().any(|&x| !domain.boundary[x]) {
            slot[c] = n_active;
            n_active += 1;
        }
    }
    let interior: Vec<usize> = (0..domain.num_vertices()).filter(|&x| !domain.boundary[x]).collect();
    if interior.is_empty() {
        return Err(Error::InvalidConfig("the domain has no interior vertex".into()));
    }
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); domain.num_vertices()];
    for (c, cell) in domain.cells.iter().enumerate() {
        for (k, &x) in cell.iter().enumerate() {
            incident[x].push((c, k));
        }
    }

    let rows: Vec<ConstraintRow> = interior
        .iter()
        .map(|&x| {
            let wx = domain.vertex_measures[x];
            let mut derivative = Vec::new();
            let mut groups = Vec::new();
            for &(c, k) in &incident[x] {
                let base = slot[c] * d;
                for comp in 0..d {
                    let coef = -domain.cell_measures[c] * domain.local_gradients[c][k][comp] / wx;
                    derivative.push((base + comp, coef));
                }
                groups.push(CopyGroup {
                    stag: (0..d).map(|comp| base + comp).collect(),
                    rho: domain.cell_measures[c] / ((d + 1) as f64 * wx),
                });
            }
            ConstraintRow { weight: wx, derivative, groups }
        })
        .collect();

    let mut linear = vec![0.0; n_active * d * nv];
    for x in domain.boundary_vertices() {
        let mu = bc.values[&x].values();
        for &(c, k) in &incident[x] {
            if slot[c] == usize::MAX {
                continue;
            }
            for comp in 0..d {
                let coef = domain.cell_measures[c] * domain.local_gradients[c][k][comp];
                let row = &mut linear[(slot[c] * d + comp) * nv..][..nv];
                for v in 0..nv {
                    row[v] += coef * areas[v] * mu[v];
                }
            }
        }
    }

    let layout = Layout { n_stag: n_active * d, dim: d, rows };
    let problem = Problem { mesh, ops, layout: layout.clone(), linear, terminal: None, remove_mean: false };
    let sol = Admm::new(problem, *cfg)?.solve()?;

    let mut values = vec![Vec::new(); domain.num_vertices()];
    for (i, &x) in interior.iter().enumerate() {
        values[x] = sol.mu[i * nv..(i + 1) * nv].to_vec();
    }
    for x in domain.boundary_vertices() {
        values[x] = bc.values[&x].values().to_vec();
    }

    let primal = split_primal(mesh, &layout, &sol.mu, &sol.m, &sol.row_offsets);
    let energy = sol.objective;
    Ok(HarmonicResult {
        values,
        energy,
        primal_energy: primal,
        gap: (primal - energy).abs() / energy.abs().max(1e-12),
        iterations: sol.iterations,
        converged: sol.converged,
        history: sol.history,
    })
}
