mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surface_ot::admm::update_penalty;
use surface_ot::geodesic::internals::PhiUpdate;
use surface_ot::geodesic::{dual_update, evaluate_action, reconstruct_velocity, tangent_norm, tangent_norm_squared};
use surface_ot::mesh::{average_to_faces, mass, shapes, DensityField, MeshOperators, TriangleMesh};
use surface_ot::{solve_geodesic, SolverConfig};

use common::gaussian_mix;

/// Hat-function gradients from the rotated opposite edge.
fn hat_gradients(mesh: &TriangleMesh, f: usize) -> [[f64; 3]; 3] {
    let p = mesh.vertices();
    let t = mesh.faces()[f];
    let e = |i: usize, j: usize| [p[j][0] - p[i][0], p[j][1] - p[i][1], p[j][2] - p[i][2]];
    let cross = |u: [f64; 3], v: [f64; 3]| [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let n = cross(e(t[0], t[1]), e(t[0], t[2]));
    let twice_area2 = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    let mut out = [[0.0; 3]; 3];
    for k in 0..3 {
        let opp = e(t[(k + 1) % 3], t[(k + 2) % 3]);
        let g = cross(n, opp);
        out[k] = [g[0] / twice_area2, g[1] / twice_area2, g[2] / twice_area2];
    }
    out
}

/// Dense operator `Lambda` and weights `W` of the geodesic constraint with
/// every copy spelled out.
fn dense_constraints(mesh: &TriangleMesh, n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let nv = mesh.num_vertices();
    let nt = mesh.num_faces();
    let tau = 1.0 / n as f64;
    let n_a = n * nv;
    let n_b = n * 2 * nt * 9;
    let mut lam = DMatrix::zeros(n_a + n_b, (n + 1) * nv);
    let mut w = vec![0.0; n_a + n_b];
    for t in 0..n {
        for v in 0..nv {
            lam[(t * nv + v, t * nv + v)] = -1.0 / tau;
            lam[(t * nv + v, (t + 1) * nv + v)] = 1.0 / tau;
            w[t * nv + v] = tau * mesh.vertex_areas()[v];
        }
    }
    for t in 0..n {
        for g in 0..2 {
            for f in 0..nt {
                let grads = hat_gradients(mesh, f);
                for corner in 0..3 {
                    for c in 0..3 {
                        let row = n_a + t * 2 * nt * 9 + ((g * nt + f) * 3 + corner) * 3 + c;
                        for k in 0..3 {
                            lam[(row, (t + g) * nv + mesh.faces()[f][k])] += grads[k][c];
                        }
                        w[row] = tau * 0.5 * mesh.face_areas()[f];
                    }
                }
            }
        }
    }
    (lam, w)
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

#[test]
fn phi_update_matches_dense_solve() {
    let mesh = shapes::rectangle(5, 2, 1.0, 0.3).unwrap();
    assert_eq!(mesh.num_vertices(), 10);
    let ops = MeshOperators::new(&mesh);
    let n = 3;
    let nv = mesh.num_vertices();
    let mu0 = gaussian_mix(&mesh, &[([0.1, 0.1], 0.3, 1.0)], 0.1);
    let mu1 = gaussian_mix(&mesh, &[([0.9, 0.2], 0.3, 1.0)], 0.1);
    let update = PhiUpdate::new(&mesh, &ops, &mu0, &mu1, n).unwrap();
    let ncopies = update.copies_len();
    assert_eq!(ncopies, n * 2 * mesh.num_faces() * 9);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rand_vec = |len: usize| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (mu, a, m, b) = (rand_vec(n * nv), rand_vec(n * nv), rand_vec(ncopies), rand_vec(ncopies));
    let r = 0.7;
    let phi = update.solve(r, &mu, &a, &m, &b);

    let (lam, w) = dense_constraints(&mesh, n);
    let wd = DMatrix::from_diagonal(&DVector::from_vec(w));
    let k = lam.transpose() * &wd * &lam;
    let mut rhs = DVector::zeros((n + 1) * nv);
    for v in 0..nv {
        rhs[v] -= mesh.vertex_areas()[v] * mu0.values()[v];
        rhs[n * nv + v] += mesh.vertex_areas()[v] * mu1.values()[v];
    }
    let q: Vec<f64> = a.iter().chain(&b).map(|x| r * x).collect();
    let sigma: Vec<f64> = mu.iter().chain(&m).cloned().collect();
    let diff = DVector::from_iterator(q.len(), q.iter().zip(&sigma).map(|(x, s)| x - s));
    rhs += lam.transpose() * &wd * diff;
    // the constant mode is the kernel; pin it with a rank-one term
    let pinned = r * &k + DMatrix::from_element(k.nrows(), k.ncols(), 1.0);
    let dense = pinned.lu().solve(&rhs).unwrap();

    let got = centered(&phi);
    let want = centered(dense.as_slice());
    let scale = want.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let err = got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8 * scale, "phi differs from the dense solve by {err:e} (scale {scale:e})");

    let res = r * &k * DVector::from_vec(phi.clone()) - &rhs;
    assert!(res.amax() <= 1e-8 * rhs.amax(), "normal-equation residual {:e}", res.amax());
    assert!(phi.iter().sum::<f64>().abs() < 1e-10 * scale);
}

#[test]
fn uniform_to_uniform_is_stationary() {
    let mesh = shapes::unit_square(6).unwrap();
    let ops = MeshOperators::new(&mesh);
    let u = DensityField::uniform(&mesh);
    let cfg = SolverConfig { time_steps: 5, ..SolverConfig::default() };
    let res = solve_geodesic(&mesh, &ops, &u, &u, &cfg).unwrap();
    assert!(res.converged);
    assert!(res.distance < 1e-5, "{}", res.distance);
    assert_eq!(res.mu_curve.len(), 5);
    for frame in &res.mu_curve {
        for (x, y) in frame.iter().zip(u.values()) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn dual_update_example() {
    let mut sigma = vec![1.0, -2.0, 0.5];
    dual_update(&mut sigma, &[0.5, 0.0, 1.0], &[0.25, 1.0, 1.0], 2.0);
    assert_eq!(sigma, vec![0.5, 0.0, 0.5]);
}

#[test]
fn penalty_balancing() {
    assert_eq!(update_penalty(1.0, 11.0, 1.0), 2.0);
    assert_eq!(update_penalty(1.0, 1.0, 11.0), 0.5);
    assert_eq!(update_penalty(1.0, 5.0, 1.0), 1.0);
    assert_eq!(update_penalty(3.0, 0.0, 0.0), 3.0);
}

#[test]
fn velocity_and_action_of_rigid_flow() {
    let mesh = shapes::unit_square(5).unwrap();
    let n = 4;
    let u = DensityField::uniform(&mesh);
    let mu_curve = vec![u.values().to_vec(); n];
    let v = [0.3, -0.4, 0.0];
    let mu_hat = average_to_faces(&mesh, u.values());
    let momentum: Vec<Vec<[f64; 3]>> =
        (0..n).map(|_| mu_hat.iter().map(|d| [d * v[0], d * v[1], d * v[2]]).collect()).collect();
    let vel = reconstruct_velocity(&mesh, &momentum, &mu_curve, 1e-12);
    for frame in &vel {
        for w in frame {
            for c in 0..3 {
                assert!((w[c] - v[c]).abs() < 1e-12);
            }
        }
    }
    // uniform unit mass: action is |v|^2 / 2
    let action = evaluate_action(&mesh, &mu_curve, &momentum, 1.0 / n as f64);
    assert!((action - 0.125).abs() < 1e-12, "{action}");

    let empty = vec![vec![0.0; mesh.num_vertices()]; n];
    let vel = reconstruct_velocity(&mesh, &momentum, &empty, 1e-12);
    assert!(vel.iter().flatten().all(|w| *w == [0.0; 3]));
}

#[test]
fn tangent_norm_is_a_norm() {
    let mesh = shapes::unit_square(8).unwrap();
    let ops = MeshOperators::new(&mesh);
    let mu = gaussian_mix(&mesh, &[([0.4, 0.5], 0.3, 1.0)], 0.2);
    let zero = vec![0.0; mesh.num_vertices()];
    assert_eq!(tangent_norm(&mesh, &ops, mu.values(), &zero).unwrap(), 0.0);

    let other = gaussian_mix(&mesh, &[([0.7, 0.3], 0.2, 1.0)], 0.2);
    let delta: Vec<f64> = other.values().iter().zip(mu.values()).map(|(a, b)| a - b).collect();
    assert!(mass(&mesh, &delta).abs() < 1e-12);
    let base = tangent_norm_squared(&mesh, &ops, mu.values(), &delta).unwrap();
    assert!(base > 0.0);
    for c in [0.5, -2.0, 3.0] {
        let scaled: Vec<f64> = delta.iter().map(|d| c * d).collect();
        let got = tangent_norm_squared(&mesh, &ops, mu.values(), &scaled).unwrap();
        assert!((got - c * c * base).abs() <= 1e-9 * got, "{got} vs {}", c * c * base);
    }

    let mut bad = delta.clone();
    bad[0] += 1.0;
    assert!(tangent_norm(&mesh, &ops, mu.values(), &bad).is_err());
}

#[test]
fn refining_time_keeps_the_distance() {
    let mesh = shapes::unit_square(8).unwrap();
    let ops = MeshOperators::new(&mesh);
    let a = gaussian_mix(&mesh, &[([0.35, 0.4], 0.18, 1.0)], 0.02);
    let b = gaussian_mix(&mesh, &[([0.65, 0.6], 0.18, 1.0)], 0.02);
    let mut vals = Vec::new();
    for n in [7, 15] {
        let cfg = SolverConfig { time_steps: n, tol: 1e-5, ..SolverConfig::default() };
        let res = solve_geodesic(&mesh, &ops, &a, &b, &cfg).unwrap();
        assert!(res.converged);
        assert!(res.gap < 0.02, "duality gap {} at N={n}", res.gap);
        vals.push(res.dual_objective);
    }
    let rel = (vals[0] - vals[1]).abs() / vals[1];
    assert!(rel < 0.05, "W^2 {vals:?}");
}

#[test]
fn congestion_flattens_the_midpoint() {
    let mesh = shapes::unit_square(10).unwrap();
    let ops = MeshOperators::new(&mesh);
    let a = gaussian_mix(&mesh, &[([0.3, 0.5], 0.1, 1.0)], 0.0);
    let b = gaussian_mix(&mesh, &[([0.7, 0.5], 0.1, 1.0)], 0.0);
    let mut peaks = Vec::new();
    for alpha in [0.0, 1.0] {
        let cfg = SolverConfig { time_steps: 7, alpha, ..SolverConfig::default() };
        let res = solve_geodesic(&mesh, &ops, &a, &b, &cfg).unwrap();
        assert!(res.converged);
        assert!(res.gap < 0.02, "gap {} at alpha {alpha}", res.gap);
        peaks.push(res.midpoint().iter().cloned().fold(0.0, f64::max));
    }
    assert!(peaks[1] < peaks[0], "{peaks:?}");
}

#[test]
fn disconnected_meshes_are_rejected() {
    let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0, 0.0, 0.0], [6.0, 0.0, 0.0], [5.0, 1.0, 0.0]];
    let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
    assert!(!mesh.is_connected());
    let ops = MeshOperators::new(&mesh);
    let u = DensityField::uniform(&mesh);
    let err = solve_geodesic(&mesh, &ops, &u, &u, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, surface_ot::Error::Disconnected));
}

/// The congestion penalty `alpha mu^2 / 2` reported with the primal is the
/// conjugate of the `lambda^2 / (2 alpha)` term in the dual objective.
#[test]
fn congestion_terms_are_conjugate() {
    for alpha in [0.05, 0.1, 1.0, 4.0] {
        for mu in [0.0, 0.3, 1.0, 7.5] {
            let hi = 2.0 * alpha * mu + 1.0;
            let sup = (0..=200_000)
                .map(|k| {
                    let l = hi * k as f64 / 200_000.0;
                    l * mu - l * l / (2.0 * alpha)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let want = 0.5 * alpha * mu * mu;
            assert!((sup - want).abs() <= 1e-8 * (1.0 + want), "alpha {alpha} mu {mu}: {sup} vs {want}");
        }
    }
}
