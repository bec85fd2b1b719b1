#![allow(dead_code)]

use rand::Rng;
use surface_ot::mesh::{normalize_density, DensityField, TriangleMesh};
use surface_ot::projection::BlockWeights;

/// Sum of isotropic Gaussians over a small floor, normalized.
pub fn gaussian_mix(mesh: &TriangleMesh, bumps: &[([f64; 2], f64, f64)], floor: f64) -> DensityField {
    let raw: Vec<f64> = mesh
        .vertices()
        .iter()
        .map(|p| {
            floor
                + bumps
                    .iter()
                    .map(|(c, s, w)| w * (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (2.0 * s * s)).exp())
                    .sum::<f64>()
        })
        .collect();
    normalize_density(mesh, &raw).unwrap()
}

pub fn random_smooth(mesh: &TriangleMesh, rng: &mut impl Rng) -> DensityField {
    let bumps: Vec<_> = (0..3)
        .map(|_| {
            let c = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
            (c, rng.gen_range(0.12..0.25), rng.gen_range(0.5..2.0))
        })
        .collect();
    gaussian_mix(mesh, &bumps, 0.05)
}

/// Classical cotangent-weight stiffness matrix, dense.
pub fn cotan_laplacian(mesh: &TriangleMesh) -> Vec<Vec<f64>> {
    let n = mesh.num_vertices();
    let p = mesh.vertices();
    let mut l = vec![vec![0.0; n]; n];
    for f in mesh.faces() {
        for k in 0..3 {
            let (o, i, j) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let u: Vec<f64> = (0..3).map(|c| p[i][c] - p[o][c]).collect();
            let v: Vec<f64> = (0..3).map(|c| p[j][c] - p[o][c]).collect();
            let dot: f64 = (0..3).map(|c| u[c] * v[c]).sum();
            let cr = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            let cot = dot / (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
            l[i][j] -= 0.5 * cot;
            l[j][i] -= 0.5 * cot;
            l[i][i] += 0.5 * cot;
            l[j][j] += 0.5 * cot;
        }
    }
    l
}

/// Largest entrywise relative difference; structurally zero entries are
/// measured against the largest diagonal entry.
pub fn max_relative_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let diag = (0..b.len()).map(|i| b[i][i].abs()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            let den = if y.abs() > 1e-12 * diag { y.abs() } else { diag };
            worst = worst.max((x - y).abs() / den);
        }
    }
    worst
}

pub struct OracleProjection {
    pub a: f64,
    pub b: Vec<f64>,
    pub gamma: f64,
}

/// Projection by bisection on the KKT multiplier of
/// `min a_w (A - a)^2 + sum beta_j |B_j - b_j|^2` s.t. `A + sum kappa_j |B_j|^2 <= 0`.
pub fn bisection_projection(a: f64, a_weight: f64, blocks: &[BlockWeights], b: &[f64], dim: usize) -> OracleProjection {
    let at = |g: f64| {
        let aa = a - g / (2.0 * a_weight);
        let bb: Vec<f64> = b
            .chunks_exact(dim)
            .zip(blocks)
            .flat_map(|(x, w)| x.iter().map(move |v| w.beta * v / (w.beta + g * w.kappa)))
            .collect();
        let c = aa
            + bb.chunks_exact(dim).zip(blocks).map(|(x, w)| w.kappa * x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();
        (aa, bb, c)
    };
    if at(0.0).2 <= 0.0 {
        return OracleProjection { a, b: b.to_vec(), gamma: 0.0 };
    }
    let mut hi = 1.0;
    while at(hi).2 > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid).2 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = 0.5 * (lo + hi);
    let (aa, bb, _) = at(g);
    OracleProjection { a: aa, b: bb, gamma: g }
}
