//! Procedural meshes used by the experiment harness and the tests.

use std::collections::HashMap;

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Regular triangulation of `[0, width] x [0, height]` with `nx` by `ny`
/// vertices, every quad split along the same diagonal.
pub fn rectangle(nx: usize, ny: usize, width: f64, height: f64) -> Result<TriangleMesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidConfig("a grid needs at least 2 points per side".into()));
    }
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([
                width * i as f64 / (nx - 1) as f64,
                height * j as f64 / (ny - 1) as f64,
                0.0,
            ]);
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Unit square with `n` points per side.
pub fn unit_square(n: usize) -> Result<TriangleMesh> {
    rectangle(n, n, 1.0, 1.0)
}

/// Index of the grid vertex `(i, j)` in a mesh built by [`rectangle`].
pub fn grid_index(nx: usize, i: usize, j: usize) -> usize {
    j * nx + i
}

/// Unit sphere from a subdivided icosahedron; `level` 0 has 12 vertices,
/// each level multiplies the face count by four.
pub fn icosphere(level: usize) -> Result<TriangleMesh> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for p in vertices.iter_mut() {
        project_to_sphere(p);
    }
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(4 * faces.len());
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 3]>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                let mut m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0];
                project_to_sphere(&mut m);
                vertices.push(m);
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces)
}

fn project_to_sphere(p: &mut [f64; 3]) {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    p.iter_mut().for_each(|x| *x /= n);
}

/// Icosphere with the faces around one vertex removed, leaving a hole.
pub fn punctured_sphere(level: usize) -> Result<TriangleMesh> {
    let sphere = icosphere(level)?;
    let faces: Vec<[usize; 3]> = sphere.faces().iter().copied().filter(|f| !f.contains(&0)).collect();
    // vertex 0 is now isolated; drop it and shift the indices
    let vertices = sphere.vertices()[1..].to_vec();
    let faces = faces.into_iter().map(|f| [f[0] - 1, f[1] - 1, f[2] - 1]).collect();
    TriangleMesh::new(vertices, faces)
}
