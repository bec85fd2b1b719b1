//! Reference solutions used to validate the dynamical solver: static optimal
//! transport between vertex measures by an exact transportation simplex,
//! vertex-to-vertex distances, and the translated-bump refinement study.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::SolverConfig;
use crate::error::{Error, Result};
use crate::geodesic::solve_geodesic;
use crate::mesh::vec3::{norm, sub};
use crate::mesh::{mass, normalize_density, shapes, DensityField, MeshOperators, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// Shortest paths along mesh edges.
    Graph,
    /// Straight-line distance in the embedding.
    Euclidean,
}

/// Dense `n x n` ground cost `c(u, v) = d(u, v)^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_distances(n: usize, distances: &[f64]) -> Result<Self> {
        if distances.len() != n * n {
            return Err(Error::SizeMismatch { expected: n * n, got: distances.len() });
        }
        Ok(CostMatrix { n, data: distances.iter().map(|d| 0.5 * d * d).collect() })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.n + v]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(w, len) in &adj[u] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(HeapItem(nd, w));
            }
        }
    }
    dist
}

/// All-pairs vertex distances, row-major.
pub fn vertex_distances(mesh: &TriangleMesh, mode: DistanceMode) -> Result<Vec<f64>> {
    let n = mesh.num_vertices();
    let p = mesh.vertices();
    match mode {
        DistanceMode::Euclidean => {
            Ok((0..n * n).map(|k| norm(sub(p[k / n], p[k % n]))).collect())
        }
        DistanceMode::Graph => {
            if !mesh.is_connected() {
                return Err(Error::Disconnected);
            }
            let mut adj = vec![Vec::new(); n];
            for [a, b] in mesh.edges() {
                let len = norm(sub(p[a], p[b]));
                adj[a].push((b, len));
                adj[b].push((a, len));
            }
            let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
            Ok(rows.concat())
        }
    }
}

pub fn graph_distances(mesh: &TriangleMesh) -> Result<CostMatrix> {
    cost_matrix(mesh, DistanceMode::Graph)
}

pub fn cost_matrix(mesh: &TriangleMesh, mode: DistanceMode) -> Result<CostMatrix> {
    CostMatrix::from_distances(mesh.num_vertices(), &vertex_distances(mesh, mode)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportPlan {
    /// Minimal `sum c(u, v) pi(u, v)`.
    pub value: f64,
    /// Nonzero entries `(u, v, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
}

/// Exact optimal transport between two vertex measures whose atoms are
/// `|v| mu_v`.
pub fn lp_transport(
    mesh: &TriangleMesh,
    cost: &CostMatrix,
    mu0: &DensityField,
    mu1: &DensityField,
) -> Result<TransportPlan> {
    let n = mesh.num_vertices();
    if cost.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: cost.len() });
    }
    for mu in [mu0, mu1] {
        if mu.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: mu.len() });
        }
    }
    let areas = mesh.vertex_areas();
    let a: Vec<f64> = mu0.values().iter().zip(areas).map(|(m, w)| m * w).collect();
    let b: Vec<f64> = mu1.values().iter().zip(areas).map(|(m, w)| m * w).collect();
    transport_simplex(&a, &b, |u, v| cost.get(u, v))
}

/// Balanced transportation problem by the simplex method on the basis tree
/// (north-west corner start, potentials for pricing). Only atoms with
/// positive mass take part.
pub fn transport_simplex(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<TransportPlan> {
    let rows: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > 0.0).collect();
    let cols: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > 0.0).collect();
    if supply.iter().chain(demand).any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidDensity("transport masses must be finite and nonnegative".into()));
    }
    let total_a: f64 = rows.iter().map(|&i| supply[i]).sum();
    let total_b: f64 = cols.iter().map(|&j| demand[j]).sum();
    if rows.is_empty() || cols.is_empty() || (total_a - total_b).abs() > 1e-9 * total_a.max(total_b) {
        return Err(Error::Infeasible(format!("unbalanced masses {total_a} and {total_b}")));
    }
    let (m, n) = (rows.len(), cols.len());
    let c: Vec<f64> = rows.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).map(|(i, j)| cost(i, j)).collect();
    let mut a: Vec<f64> = rows.iter().map(|&i| supply[i]).collect();
    let mut b: Vec<f64> = cols.iter().map(|&j| demand[j] * total_a / total_b).collect();

    // north-west corner: m + n - 1 basic cells, some possibly at zero flow
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = a[i].min(b[j]);
        basis.push((i, j, x));
        a[i] -= x;
        b[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (a[i] <= b[j] && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);

    let scale = c.iter().fold(0.0f64, |acc, &x| acc.max(x.abs())).max(1e-300);
    let max_pivots = 50 * (m + n) * (m + n) + 1000;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    for _ in 0..max_pivots {
        // adjacency of the basis tree: nodes 0..m are rows, m..m+n columns
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n];
        for (k, &(i, j, _)) in basis.iter().enumerate() {
            adj[i].push((m + j, k));
            adj[m + j].push((i, k));
        }
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &(other, k) in &adj[node] {
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                let (i, j, _) = basis[k];
                if other >= m {
                    v[j] = c[i * n + j] - u[i];
                } else {
                    u[i] = c[i * n + j] - v[j];
                }
                queue.push_back(other);
            }
        }
        let mut entering = None;
        let mut best = -1e-12 * scale;
        for i in 0..m {
            for j in 0..n {
                let red = c[i * n + j] - u[i] - v[j];
                if red < best {
                    best = red;
                    entering = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let mut value = 0.0;
            let mut entries = Vec::new();
            for &(i, j, x) in &basis {
                if x > 0.0 {
                    value += c[i * n + j] * x;
                    entries.push((rows[i], cols[j], x));
                }
            }
            return Ok(TransportPlan { value, entries });
        };
        // tree path from row ei to column ej
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; m + n];
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::from([ei]);
        seen[ei] = true;
        while let Some(node) = queue.pop_front() {
            if node == m + ej {
                break;
            }
            for &(other, k) in &adj[node] {
                if !seen[other] {
                    seen[other] = true;
                    parent[other] = Some((node, k));
                    queue.push_back(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = m + ej;
        while node != ei {
            let (prev, k) = parent[node].expect("basis is a spanning tree");
            path.push(k);
            node = prev;
        }
        // path runs from the column back to the row; every other edge
        // starting with the first loses flow
        let mut theta = f64::INFINITY;
        let mut leave = 0;
        for (l, &k) in path.iter().enumerate() {
            if l % 2 == 0 && basis[k].2 < theta {
                theta = basis[k].2;
                leave = k;
            }
        }
        for (l, &k) in path.iter().enumerate() {
            if l % 2 == 0 {
                basis[k].2 -= theta;
            } else {
                basis[k].2 += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
    }
    Err(Error::Infeasible("transportation simplex did not terminate".into()))
}

/// Truncated bump `(1 - |x - c|^2 / R^2)^2` normalized to a density.
pub fn bump_density(mesh: &TriangleMesh, center: [f64; 2], radius: f64) -> Result<DensityField> {
    let raw: Vec<f64> = mesh
        .vertices()
        .iter()
        .map(|p| {
            let s = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (radius * radius);
            if s < 1.0 {
                (1.0 - s).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    normalize_density(mesh, &raw)
}

/// Parameters of the translation test on the unit square.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TranslationSetup {
    pub radius: f64,
    /// The bump moves from `center - shift` to `center + shift` along x.
    pub shift: f64,
    pub center: [f64; 2],
}

impl Default for TranslationSetup {
    fn default() -> Self {
        TranslationSetup { radius: 0.2, shift: 0.15, center: [0.5, 0.5] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// Points per side of the square.
    pub side: usize,
    pub time_steps: usize,
    /// `sum |v| |mu_mid - exact|`.
    pub l1_error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest `|sum |v| mu_v - 1|` over the centered frames.
    pub mass_error: f64,
    pub min_density: f64,
}

/// Midpoint error of the translated bump for one mesh and time resolution.
/// `time_steps` must be odd so a centered frame sits at `t = 1/2`.
pub fn translation_error(side: usize, time_steps: usize, setup: &TranslationSetup, cfg: &SolverConfig) -> Result<ConvergenceRow> {
    if time_steps % 2 == 0 {
        return Err(Error::InvalidConfig("translation test needs an odd number of time steps".into()));
    }
    let mesh = shapes::unit_square(side)?;
    let ops = MeshOperators::new(&mesh);
    let [cx, cy] = setup.center;
    let mu0 = bump_density(&mesh, [cx - setup.shift, cy], setup.radius)?;
    let mu1 = bump_density(&mesh, [cx + setup.shift, cy], setup.radius)?;
    let exact = bump_density(&mesh, setup.center, setup.radius)?;
    let cfg = SolverConfig { time_steps, ..*cfg };
    let res = solve_geodesic(&mesh, &ops, &mu0, &mu1, &cfg)?;
    let mid = &res.mu_curve[(time_steps - 1) / 2];
    let l1 = mid
        .iter()
        .zip(exact.values())
        .zip(mesh.vertex_areas())
        .map(|((a, b), w)| w * (a - b).abs())
        .sum();
    let mass_error = res.mu_curve.iter().map(|mu| (mass(&mesh, mu) - 1.0).abs()).fold(0.0, f64::max);
    let min_density = res.mu_curve.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    Ok(ConvergenceRow {
        side,
        time_steps,
        l1_error: l1,
        iterations: res.iterations,
        converged: res.converged,
        mass_error,
        min_density,
    })
}

/// Every combination of `sides` and `time_steps`.
pub fn convergence_experiment(
    sides: &[usize],
    time_steps: &[usize],
    setup: &TranslationSetup,
    cfg: &SolverConfig,
) -> Result<Vec<ConvergenceRow>> {
    let mut out = Vec::new();
    for &side in sides {
        for &n in time_steps {
            out.push(translation_error(side, n, setup, cfg)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_distances() {
        let mesh = shapes::rectangle(3, 2, 2.0, 1.0).unwrap();
        let d = vertex_distances(&mesh, DistanceMode::Graph).unwrap();
        let n = mesh.num_vertices();
        let (a, c) = (shapes::grid_index(3, 0, 0), shapes::grid_index(3, 2, 0));
        assert!((d[a * n + c] - 2.0).abs() < 1e-14);
        let e = vertex_distances(&mesh, DistanceMode::Euclidean).unwrap();
        let far = shapes::grid_index(3, 2, 1);
        assert!((e[a * n + far] - 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn three_point_instance() {
        // (1/2, 1/2) at distances 1 and 3 from a single target
        let plan = transport_simplex(&[0.5, 0.5], &[1.0], |i, _| [0.5, 4.5][i]).unwrap();
        assert!((plan.value - 2.5).abs() < 1e-14);
    }

    #[test]
    fn simplex_matches_brute_force_on_2x2() {
        // the plan polytope is a segment; check both vertices
        let c = [[0.0, 2.0], [3.0, 1.0]];
        let plan = transport_simplex(&[0.3, 0.7], &[0.6, 0.4], |i, j| c[i][j]).unwrap();
        let lo = 0.0;
        let hi = 0.3f64.min(0.6);
        let value = |x: f64| c[0][0] * x + c[0][1] * (0.3 - x) + c[1][0] * (0.6 - x) + c[1][1] * (x + 0.1);
        let best = value(lo).min(value(hi));
        assert!((plan.value - best).abs() < 1e-14);
    }
}
