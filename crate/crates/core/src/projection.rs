//! Weighted projection onto the paraboloid `A + sum_j kappa_j |B_j|^2 <= 0`.
//!
//! Minimizes `a_w (A - a)^2 + sum_j beta_j |B_j - b_j|^2` over the set. With
//! multiplier `gamma >= 0` the KKT conditions give
//! `A = a - gamma / (2 a_w)` and `B_j = beta_j b_j / (beta_j + gamma kappa_j)`,
//! so `gamma` is the root of the scalar function
//!
//! `h(gamma) = a - gamma / (2 a_w) + sum_j kappa_j |b_j|^2 beta_j^2 / (beta_j + gamma kappa_j)^2`.
//!
//! `h` is convex and strictly decreasing on `[0, inf)`, so Newton started at
//! zero climbs monotonically to the root. For a single block this is the
//! classical cubic.

use crate::error::{Error, Result};

/// Weights of one `B` block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockWeights {
    pub beta: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    pub a: f64,
    /// KKT multiplier; zero when the input was already feasible.
    pub gamma: f64,
}

const NEWTON_MAX: usize = 50;
const REL_TOL: f64 = 1e-15;

/// Projects in place. `b` holds the blocks back to back, `dim` reals each.
/// `norms` is scratch space.
pub fn project(
    a: f64,
    a_weight: f64,
    blocks: &[BlockWeights],
    b: &mut [f64],
    dim: usize,
    norms: &mut Vec<f64>,
) -> Result<Projected> {
    debug_assert_eq!(b.len(), blocks.len() * dim);
    norms.clear();
    norms.extend(b.chunks_exact(dim).map(|x| x.iter().map(|v| v * v).sum::<f64>()));

    let h0 = a + blocks.iter().zip(norms.iter()).map(|(w, n)| w.kappa * n).sum::<f64>();
    if h0 <= 0.0 {
        return Ok(Projected { a, gamma: 0.0 });
    }

    let h = |g: f64| -> (f64, f64) {
        let mut val = a - g / (2.0 * a_weight);
        let mut der = -1.0 / (2.0 * a_weight);
        for (w, &n) in blocks.iter().zip(norms.iter()) {
            let s = w.beta / (w.beta + g * w.kappa);
            val += w.kappa * n * s * s;
            der -= 2.0 * w.kappa * w.kappa * n * s * s / (w.beta + g * w.kappa);
        }
        (val, der)
    };
    // size of the terms that cancel at the root
    let scale = a.abs() + h0.abs();

    let mut gamma = 0.0;
    let mut converged = false;
    for _ in 0..NEWTON_MAX {
        let (val, der) = h(gamma);
        if val.abs() <= REL_TOL * scale {
            converged = true;
            break;
        }
        let next = gamma - val / der;
        if !(next.is_finite()) || next < gamma {
            break;
        }
        if next - gamma <= 1e-16 * next {
            gamma = next;
            converged = true;
            break;
        }
        gamma = next;
    }

    if !converged {
        gamma = bisect(&|g| h(g).0, scale)?;
    }

    let new_a = a - gamma / (2.0 * a_weight);
    for (blk, w) in b.chunks_exact_mut(dim).zip(blocks) {
        let s = w.beta / (w.beta + gamma * w.kappa);
        blk.iter_mut().for_each(|v| *v *= s);
    }
    Ok(Projected { a: new_a, gamma })
}

fn bisect(h: &dyn Fn(f64) -> f64, scale: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grown = 0;
    while h(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > 2100 || !hi.is_finite() {
            return Err(Error::ProjectionFailed { residual: h(lo) });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = h(mid);
        if v.abs() <= REL_TOL * scale {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = 0.5 * (lo + hi);
    let residual = h(g);
    if residual.abs() > 1e-8 * scale.max(1.0) {
        return Err(Error::ProjectionFailed { residual });
    }
    Ok(g)
}

/// `A + sum_j kappa_j |B_j|^2`, nonpositive on the feasible set.
pub fn constraint_value(a: f64, blocks: &[BlockWeights], b: &[f64], dim: usize) -> f64 {
    a + b
        .chunks_exact(dim)
        .zip(blocks)
        .map(|(x, w)| w.kappa * x.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
}
