//! Triangle meshes, probability densities on their vertices, and the
//! first-order finite element operators built on them.

mod io;
pub mod shapes;

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::{reverse_cuthill_mckee, CsrMatrix, EnvelopeCholesky};

pub use io::{parse_obj, parse_off, read_raw, write_off, MeshFormat, RawMesh};

pub(crate) mod vec3 {
    pub type V3 = [f64; 3];

    #[inline]
    pub fn sub(a: V3, b: V3) -> V3 {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }
    #[inline]
    pub fn dot(a: V3, b: V3) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }
    #[inline]
    pub fn cross(a: V3, b: V3) -> V3 {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }
    #[inline]
    pub fn norm(a: V3) -> f64 {
        dot(a, a).sqrt()
    }
    #[inline]
    pub fn scale(a: V3, s: f64) -> V3 {
        [a[0] * s, a[1] * s, a[2] * s]
    }
}

use vec3::{cross, dot, norm, scale, sub};

/// A validated, edge-manifold, orientable triangle mesh with cached areas.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    face_areas: Vec<f64>,
    vertex_areas: Vec<f64>,
    face_normals: Vec<[f64; 3]>,
    face_tangent_basis: Vec<[[f64; 3]; 2]>,
    // vertex -> (face, corner) incidence, CSR layout
    incidence_offsets: Vec<usize>,
    incidence: Vec<(usize, usize)>,
    boundary_vertices: Vec<bool>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i >= nv {
                    return Err(Error::IndexOutOfRange { face: fi, index: i, count: nv });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::RepeatedVertex { face: fi });
            }
        }
        if faces.is_empty() {
            return Err(Error::Parse { line: 0, message: "mesh has no faces".into() });
        }

        let mut face_areas = Vec::with_capacity(faces.len());
        let mut face_normals = Vec::with_capacity(faces.len());
        let mut face_tangent_basis = Vec::with_capacity(faces.len());
        for f in &faces {
            let (p0, p1, p2) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
            let c = cross(sub(p1, p0), sub(p2, p0));
            let twice_area = norm(c);
            face_areas.push(0.5 * twice_area);
            let n = if twice_area > 0.0 { scale(c, 1.0 / twice_area) } else { [0.0; 3] };
            face_normals.push(n);
            let e = sub(p1, p0);
            let le = norm(e);
            let e1 = if le > 0.0 { scale(e, 1.0 / le) } else { [0.0; 3] };
            face_tangent_basis.push([e1, cross(n, e1)]);
        }
        let mean_area = face_areas.iter().sum::<f64>() / faces.len() as f64;
        for (fi, &a) in face_areas.iter().enumerate() {
            if !(a >= 1e-12 * mean_area) || a == 0.0 {
                return Err(Error::ZeroAreaFace { face: fi, area: a });
            }
        }

        let mut vertex_areas = vec![0.0; nv];
        let mut counts = vec![0usize; nv + 1];
        for (f, &a) in faces.iter().zip(&face_areas) {
            for &v in f {
                vertex_areas[v] += a / 3.0;
                counts[v + 1] += 1;
            }
        }
        if let Some(v) = counts[1..].iter().position(|&c| c == 0) {
            return Err(Error::IsolatedVertex(v));
        }
        for i in 0..nv {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut incidence = vec![(0, 0); counts[nv]];
        for (fi, f) in faces.iter().enumerate() {
            for (corner, &v) in f.iter().enumerate() {
                incidence[cursor[v]] = (fi, corner);
                cursor[v] += 1;
            }
        }

        let boundary_vertices = check_manifold_and_orientation(nv, &faces)?;

        Ok(TriangleMesh {
            vertices,
            faces,
            face_areas,
            vertex_areas,
            face_normals,
            face_tangent_basis,
            incidence_offsets: counts,
            incidence,
            boundary_vertices,
        })
    }

    pub fn load(path: impl AsRef<Path>, format: MeshFormat) -> Result<Self> {
        let raw = read_raw(path.as_ref(), format)?;
        Self::from_raw(raw)
    }

    /// Loads a mesh, picking the format from the file extension.
    pub fn load_auto(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let format = MeshFormat::from_path(path).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("cannot infer mesh format of {}", path.display()),
        })?;
        Self::load(path, format)
    }

    pub fn from_raw(raw: RawMesh) -> Result<Self> {
        let mut faces = Vec::with_capacity(raw.faces.len());
        for (fi, f) in raw.faces.iter().enumerate() {
            if f.len() != 3 {
                return Err(Error::NonTriangularFace { face: fi, arity: f.len() });
            }
            faces.push([f[0], f[1], f[2]]);
        }
        Self::new(raw.vertices, faces)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    /// Barycentric dual cell areas, a third of the incident face areas.
    pub fn vertex_areas(&self) -> &[f64] {
        &self.vertex_areas
    }

    pub fn face_normals(&self) -> &[[f64; 3]] {
        &self.face_normals
    }

    pub fn face_tangent_basis(&self) -> &[[[f64; 3]; 2]] {
        &self.face_tangent_basis
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// `(face, corner)` pairs of the faces incident to `v`.
    pub fn vertex_faces(&self, v: usize) -> &[(usize, usize)] {
        &self.incidence[self.incidence_offsets[v]..self.incidence_offsets[v + 1]]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertices[v]
    }

    pub fn has_boundary(&self) -> bool {
        self.boundary_vertices.iter().any(|&b| b)
    }

    /// Unique undirected edges with `a < b`.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .faces
            .iter()
            .flat_map(|f| (0..3).map(move |k| sorted_edge(f[k], f[(k + 1) % 3])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn is_connected(&self) -> bool {
        let nv = self.num_vertices();
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for f in &self.faces {
            for k in 1..3 {
                let (a, b) = (find(&mut parent, f[0]), find(&mut parent, f[k]));
                parent[a] = b;
            }
        }
        let root = find(&mut parent, 0);
        (0..nv).all(|v| find(&mut parent, v) == root)
    }
}

fn sorted_edge(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Rejects edges with more than two faces and checks that the faces can be
/// oriented consistently. Returns the per-vertex boundary flags.
fn check_manifold_and_orientation(nv: usize, faces: &[[usize; 3]]) -> Result<Vec<bool>> {
    // edge -> incident (face, +1 if the face traverses it as a->b with a<b)
    let mut edge_faces: HashMap<[usize; 2], Vec<(usize, bool)>> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            edge_faces.entry(sorted_edge(a, b)).or_default().push((fi, a < b));
        }
    }
    let mut boundary = vec![false; nv];
    let mut adjacency: Vec<Vec<(usize, bool)>> = vec![Vec::new(); faces.len()];
    for (e, inc) in &edge_faces {
        match inc.len() {
            1 => {
                boundary[e[0]] = true;
                boundary[e[1]] = true;
            }
            2 => {
                let ((f, df), (g, dg)) = (inc[0], inc[1]);
                // consistently oriented neighbours traverse the shared edge in opposite directions
                let same = df == dg;
                adjacency[f].push((g, same));
                adjacency[g].push((f, same));
            }
            count => return Err(Error::NonManifoldEdge { a: e[0], b: e[1], count }),
        }
    }

    // flip[f]: whether f must be reversed to agree with its component's seed
    let mut flip: Vec<Option<bool>> = vec![None; faces.len()];
    let mut stack = Vec::new();
    for seed in 0..faces.len() {
        if flip[seed].is_some() {
            continue;
        }
        flip[seed] = Some(false);
        stack.push(seed);
        while let Some(f) = stack.pop() {
            let ff = flip[f].unwrap();
            for &(g, same) in &adjacency[f] {
                let want = ff ^ same;
                match flip[g] {
                    None => {
                        flip[g] = Some(want);
                        stack.push(g);
                    }
                    Some(existing) if existing != want => return Err(Error::NonOrientable),
                    Some(_) => {}
                }
            }
        }
    }
    Ok(boundary)
}

/// A probability density on the vertices: `mu >= 0` and `sum |v| mu_v = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
}

impl DensityField {
    /// Wraps values that are already a probability density (checked).
    pub fn new(mesh: &TriangleMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::SizeMismatch { expected: mesh.num_vertices(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDensity(format!("entry {i} is {}", values[i])));
        }
        let mass = mass(mesh, &values);
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDensity(format!("total mass is {mass}, expected 1")));
        }
        Ok(DensityField { values })
    }

    /// Wraps values without checking; used for solver output that is only
    /// approximately in P(S).
    pub fn from_values_unchecked(values: Vec<f64>) -> Self {
        DensityField { values }
    }

    pub fn uniform(mesh: &TriangleMesh) -> Self {
        DensityField { values: vec![1.0 / mesh.total_area(); mesh.num_vertices()] }
    }

    /// Unit mass concentrated on one dual cell.
    pub fn delta(mesh: &TriangleMesh, v: usize) -> Result<Self> {
        if v >= mesh.num_vertices() {
            return Err(Error::InvalidDensity(format!("vertex {v} out of range")));
        }
        let mut values = vec![0.0; mesh.num_vertices()];
        values[v] = 1.0 / mesh.vertex_areas()[v];
        Ok(DensityField { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mass(&self, mesh: &TriangleMesh) -> f64 {
        mass(mesh, &self.values)
    }
}

/// `sum_v |v| values_v`
pub fn mass(mesh: &TriangleMesh, values: &[f64]) -> f64 {
    values.iter().zip(mesh.vertex_areas()).map(|(m, a)| m * a).sum()
}

/// Scales nonnegative per-vertex weights into a probability density.
pub fn normalize_density(mesh: &TriangleMesh, raw: &[f64]) -> Result<DensityField> {
    if raw.len() != mesh.num_vertices() {
        return Err(Error::SizeMismatch { expected: mesh.num_vertices(), got: raw.len() });
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidDensity(format!("entry {i} is {}", raw[i])));
    }
    let total = mass(mesh, raw);
    if total <= 0.0 {
        return Err(Error::InvalidDensity("all entries are zero".into()));
    }
    Ok(DensityField { values: raw.iter().map(|v| v / total).collect() })
}

/// Per-face mean of the three vertex values.
pub fn average_to_faces(mesh: &TriangleMesh, mu: &[f64]) -> Vec<f64> {
    assert_eq!(mu.len(), mesh.num_vertices());
    mesh.faces().iter().map(|f| (mu[f[0]] + mu[f[1]] + mu[f[2]]) / 3.0).collect()
}

/// Piecewise-linear finite element operators of a mesh.
///
/// The gradient `G` maps vertex values to one tangent 3-vector per face. It is
/// stored as the gradients of the three hat functions of each face, which is
/// exactly the nonzero pattern of the `3|T| x |V|` matrix.
#[derive(Debug, Clone)]
pub struct MeshOperators {
    hat_gradients: Vec<[[f64; 3]; 3]>,
    laplacian: CsrMatrix,
    ordering: Vec<usize>,
}

impl MeshOperators {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let mut hat_gradients = Vec::with_capacity(mesh.num_faces());
        for (fi, f) in mesh.faces().iter().enumerate() {
            let p = [mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]];
            let n = mesh.face_normals[fi];
            let twice_area = 2.0 * mesh.face_areas[fi];
            let mut g = [[0.0; 3]; 3];
            for (k, gk) in g.iter_mut().enumerate() {
                // edge opposite to corner k, oriented along the face
                let e = sub(p[(k + 2) % 3], p[(k + 1) % 3]);
                *gk = scale(cross(n, e), 1.0 / twice_area);
            }
            hat_gradients.push(g);
        }
        let laplacian = weighted_stiffness(mesh, &hat_gradients, None);
        let ordering = reverse_cuthill_mckee(&laplacian);
        MeshOperators { hat_gradients, laplacian, ordering }
    }

    /// Gradients of the hat functions of the corners of face `f`.
    pub fn hat_gradients(&self, f: usize) -> &[[f64; 3]; 3] {
        &self.hat_gradients[f]
    }

    /// `G^T M_T G`, the cotangent Laplacian (positive semidefinite sign).
    pub fn laplacian(&self) -> &CsrMatrix {
        &self.laplacian
    }

    /// Fill-reducing ordering shared by every matrix with the Laplacian's pattern.
    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    /// `(G phi)_f` for every face.
    pub fn gradient(&self, mesh: &TriangleMesh, phi: &[f64]) -> Vec<[f64; 3]> {
        let mut flat = vec![0.0; 3 * mesh.num_faces()];
        self.gradient_into(mesh, phi, &mut flat);
        flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    }

    /// Writes `G phi` into `out`, three consecutive reals per face.
    pub fn gradient_into(&self, mesh: &TriangleMesh, phi: &[f64], out: &mut [f64]) {
        for ((f, g), o) in mesh.faces().iter().zip(&self.hat_gradients).zip(out.chunks_exact_mut(3)) {
            let mut acc = [0.0; 3];
            for k in 0..3 {
                let s = phi[f[k]];
                for c in 0..3 {
                    acc[c] += s * g[k][c];
                }
            }
            o.copy_from_slice(&acc);
        }
    }

    /// Accumulates `G^T y` (unweighted transpose) into `out`; `y` holds three
    /// reals per face.
    pub fn gradient_transpose_add(&self, mesh: &TriangleMesh, y: &[f64], out: &mut [f64]) {
        for ((f, g), yf) in mesh.faces().iter().zip(&self.hat_gradients).zip(y.chunks_exact(3)) {
            let yf = [yf[0], yf[1], yf[2]];
            for k in 0..3 {
                out[f[k]] += dot(g[k], yf);
            }
        }
    }

    /// The `3|T| x |V|` gradient matrix, rows ordered face-major.
    pub fn gradient_matrix(&self, mesh: &TriangleMesh) -> CsrMatrix {
        let mut t = Vec::with_capacity(9 * mesh.num_faces());
        for (fi, (f, g)) in mesh.faces().iter().zip(&self.hat_gradients).enumerate() {
            for k in 0..3 {
                for c in 0..3 {
                    t.push((3 * fi + c, f[k], g[k][c]));
                }
            }
        }
        CsrMatrix::from_triplets(3 * mesh.num_faces(), mesh.num_vertices(), &t)
    }

    /// `G^T M_T diag(w) G` for per-face weights `w`.
    pub fn weighted_laplacian(&self, mesh: &TriangleMesh, face_weights: &[f64]) -> CsrMatrix {
        weighted_stiffness(mesh, &self.hat_gradients, Some(face_weights))
    }

    /// `sum_f |f| ||(G phi)_f||^2`, twice the Dirichlet energy.
    pub fn dirichlet_quadratic(&self, mesh: &TriangleMesh, phi: &[f64]) -> f64 {
        self.gradient(mesh, phi)
            .iter()
            .zip(mesh.face_areas())
            .map(|(g, a)| a * dot(*g, *g))
            .sum()
    }
}

fn weighted_stiffness(
    mesh: &TriangleMesh,
    hat_gradients: &[[[f64; 3]; 3]],
    face_weights: Option<&[f64]>,
) -> CsrMatrix {
    let mut t = Vec::with_capacity(9 * mesh.num_faces());
    for (fi, (f, g)) in mesh.faces().iter().zip(hat_gradients).enumerate() {
        let w = mesh.face_areas[fi] * face_weights.map_or(1.0, |w| w[fi]);
        for a in 0..3 {
            for b in 0..3 {
                t.push((f[a], f[b], w * dot(g[a], g[b])));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), &t)
}

/// Solves `K x = b` for a stiffness-like matrix `K` whose kernel is the
/// constants, returning the solution with zero area-weighted mean.
pub(crate) fn solve_mean_zero(
    mesh: &TriangleMesh,
    k: &CsrMatrix,
    ordering: &[usize],
    b: &[f64],
) -> Result<Vec<f64>> {
    let chol = EnvelopeCholesky::factor_semidefinite(k, ordering).map_err(|e| match e {
        Error::Singular(_) => Error::Disconnected,
        other => other,
    })?;
    let mut x = chol.solve(b);
    let shift = mass(mesh, &x) / mesh.total_area();
    x.iter_mut().for_each(|v| *v -= shift);
    Ok(x)
}
