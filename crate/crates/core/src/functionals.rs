//! Minimizing-movement (JKO) gradient flows in the discrete Wasserstein space.
//!
//! One step computes `argmin_mu W_d^2(mu, mu_prev) + 2 s F(mu)`, which has the
//! same minimizer as `W_d^2 / (2s) + F`. In the dual the free endpoint turns
//! into `-sum_v |v| h_v^*(-phi^1_v)` with `h_v = 2 s f_v`, handled by an extra
//! slack variable in the splitting; the density at `t = 1` is its multiplier.

use serde::{Deserialize, Serialize};

use crate::admm::{Admm, EndpointFunction, Problem, SolverConfig, Terminal};
use crate::error::{Error, Result};
use crate::geodesic::{check_density, time_layout};
use crate::mesh::{mass, DensityField, MeshOperators, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FlowFunctional {
    /// `sum |v| W_v mu_v` subject to `mu <= cap`.
    Crowd { potential: Vec<f64>, cap: f64 },
    /// `sum |v| mu_v^m / (m - 1)`.
    Porous { exponent: f64 },
}

impl FlowFunctional {
    pub fn validate(&self, mesh: &TriangleMesh) -> Result<()> {
        match self {
            FlowFunctional::Crowd { potential, cap } => {
                if potential.len() != mesh.num_vertices() {
                    return Err(Error::SizeMismatch { expected: mesh.num_vertices(), got: potential.len() });
                }
                if !(*cap > 0.0) || *cap * mesh.total_area() < 1.0 - 1e-12 {
                    return Err(Error::Infeasible(format!(
                        "cap {cap} is below 1 / area = {}",
                        1.0 / mesh.total_area()
                    )));
                }
                Ok(())
            }
            FlowFunctional::Porous { exponent } => {
                if !(*exponent > 1.0 && exponent.is_finite()) {
                    return Err(Error::InvalidConfig("porous exponent must exceed 1".into()));
                }
                Ok(())
            }
        }
    }
}

/// `F(mu)`, `+inf` for crowd densities above the cap.
pub fn evaluate_functional(f: &FlowFunctional, mesh: &TriangleMesh, mu: &[f64]) -> f64 {
    let areas = mesh.vertex_areas();
    match f {
        FlowFunctional::Crowd { potential, cap } => {
            if mu.iter().any(|&m| m > *cap) {
                return f64::INFINITY;
            }
            mu.iter().zip(potential).zip(areas).map(|((m, w), a)| a * w * m).sum()
        }
        FlowFunctional::Porous { exponent } => {
            mu.iter().zip(areas).map(|(m, a)| a * m.max(0.0).powf(*exponent)).sum::<f64>() / (exponent - 1.0)
        }
    }
}

/// `h_v = 2 s f_v` for one functional and step.
struct Endpoint<'a> {
    f: &'a FlowFunctional,
    s: f64,
}

impl EndpointFunction for Endpoint<'_> {
    fn prox(&self, v: usize, x: f64, r: f64) -> f64 {
        match self.f {
            FlowFunctional::Crowd { potential, cap } => (x - 2.0 * self.s * r * potential[v]).clamp(0.0, *cap),
            FlowFunctional::Porous { exponent } => {
                let c = 2.0 * self.s / (exponent - 1.0);
                porous_prox(x, r * c, *exponent)
            }
        }
    }

    fn conjugate(&self, v: usize, p: f64) -> f64 {
        match self.f {
            FlowFunctional::Crowd { potential, cap } => cap * (p - 2.0 * self.s * potential[v]).max(0.0),
            FlowFunctional::Porous { exponent } => {
                let c = 2.0 * self.s / (exponent - 1.0);
                porous_conjugate(p, c, *exponent)
            }
        }
    }
}

/// `argmin_{u >= 0} k u^m + (u - x)^2 / 2`, the root of `k m u^(m-1) + u = x`.
fn porous_prox(x: f64, k: f64, m: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let g = |u: f64| k * m * u.powf(m - 1.0) + u - x;
    let (mut lo, mut hi) = (0.0, x);
    let mut u = x;
    for _ in 0..100 {
        let val = g(u);
        if val.abs() <= 1e-14 * x {
            return u;
        }
        if val > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let der = k * m * (m - 1.0) * u.powf(m - 2.0) + 1.0;
        let next = u - val / der;
        u = if next > lo && next < hi && next.is_finite() { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-16 * x {
            break;
        }
    }
    u
}

/// `sup_{u >= 0} p u - c u^m`.
fn porous_conjugate(p: f64, c: f64, m: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let u = (p / (c * m)).powf(1.0 / (m - 1.0));
    (m - 1.0) * c * u.powf(m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JkoStep {
    pub density: Vec<f64>,
    /// `W_d^2(mu, mu_prev)`, from the dual objective minus `2 s F(mu)`.
    pub transport_cost: f64,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One minimizing-movement step of size `s`.
pub fn jko_step(
    mesh: &TriangleMesh,
    ops: &MeshOperators,
    mu_prev: &DensityField,
    f: &FlowFunctional,
    s: f64,
    cfg: &SolverConfig,
) -> Result<JkoStep> {
    cfg.validate()?;
    f.validate(mesh)?;
    check_density(mesh, mu_prev, "mu_prev")?;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidConfig("step must be positive".into()));
    }
    if let FlowFunctional::Crowd { cap, .. } = f {
        if mu_prev.values().iter().any(|&m| m > cap * (1.0 + 1e-9)) {
            return Err(Error::Infeasible("previous density exceeds the cap".into()));
        }
    }
    let n = cfg.time_steps;
    let nv = mesh.num_vertices();
    let mut linear = vec![0.0; (n + 1) * nv];
    for (v, (m, a)) in mu_prev.values().iter().zip(mesh.vertex_areas()).enumerate() {
        linear[v] = -a * m;
    }
    let endpoint = Endpoint { f, s };
    let problem = Problem {
        mesh,
        ops,
        layout: time_layout(n),
        linear,
        terminal: Some(Terminal { stag: n, function: &endpoint }),
        remove_mean: false,
    };
    let sol = Admm::new(problem, *cfg)?.solve()?;
    let cap = match f {
        FlowFunctional::Crowd { cap, .. } => *cap,
        FlowFunctional::Porous { .. } => f64::INFINITY,
    };
    let density = project_to_densities(mesh, &sol.nu, cap)?;
    let energy = evaluate_functional(f, mesh, &density);
    Ok(JkoStep {
        transport_cost: sol.objective - 2.0 * s * energy,
        density,
        energy,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Area-weighted projection onto `{0 <= mu <= cap, sum |v| mu_v = 1}`:
/// `mu = clamp(x - theta, 0, cap)` with the shift found by bisection.
pub fn project_to_densities(mesh: &TriangleMesh, x: &[f64], cap: f64) -> Result<Vec<f64>> {
    if cap.is_finite() && cap * mesh.total_area() < 1.0 - 1e-12 {
        return Err(Error::Infeasible("cap too small for a probability density".into()));
    }
    let apply = |theta: f64| -> Vec<f64> { x.iter().map(|v| (v - theta).clamp(0.0, cap)).collect() };
    let excess = |theta: f64| mass(mesh, &apply(theta)) - 1.0;
    let hi_x = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo_x = x.iter().cloned().fold(f64::INFINITY, f64::min);
    // excess is nonincreasing in theta
    let mut lo = lo_x - cap.min(1.0 / mesh.total_area()) - 1.0;
    while excess(lo) < 0.0 {
        lo -= 2.0 * (hi_x - lo).abs() + 1.0;
    }
    let mut hi = hi_x;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut mu = apply(0.5 * (lo + hi));
    // remove the last bisection rounding from the mass
    let total = mass(mesh, &mu);
    if total > 0.0 && cap.is_infinite() {
        mu.iter_mut().for_each(|v| *v /= total);
    }
    Ok(mu)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FlowTrace {
    /// `mu^0, mu^s, mu^2s, ...`
    pub densities: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// Transport cost of each step.
    pub transport_costs: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: bool,
}

pub fn run_flow(
    mesh: &TriangleMesh,
    ops: &MeshOperators,
    mu0: &DensityField,
    f: &FlowFunctional,
    s: f64,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<FlowTrace> {
    let mut trace = FlowTrace {
        densities: vec![mu0.values().to_vec()],
        energies: vec![evaluate_functional(f, mesh, mu0.values())],
        converged: true,
        ..FlowTrace::default()
    };
    let mut current = mu0.clone();
    for _ in 0..steps {
        let step = jko_step(mesh, ops, &current, f, s, cfg)?;
        trace.converged &= step.converged;
        trace.energies.push(step.energy);
        trace.transport_costs.push(step.transport_cost);
        trace.iterations.push(step.iterations);
        trace.densities.push(step.density.clone());
        current = DensityField::from_values_unchecked(step.density);
    }
    Ok(trace)
}
