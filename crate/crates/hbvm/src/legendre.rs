//! Shifted orthonormal Legendre polynomials on [0, 1] and Gauss-Legendre
//! quadrature rules.
//!
//! The basis used throughout the crate is `P_j(x) = sqrt(2j+1) L_j(2x - 1)`
//! with `L_j` the classical Legendre polynomial, so that
//! `int_0^1 P_i P_j = delta_ij`.

use crate::error::{Error, Result};

/// Largest supported rule size. Newton root-finding and the polynomial
/// recurrences are well-conditioned well past this point; the cap simply
/// bounds what the rest of the crate has to be tested for.
pub const MAX_NODES: usize = 64;

/// Classical (non-normalized) Legendre polynomial `L_j(t)` on [-1, 1] via the
/// three-term recurrence.
fn legendre(degree: usize, t: f64) -> f64 {
    let mut prev = 1.0;
    if degree == 0 {
        return prev;
    }
    let mut cur = t;
    for n in 1..degree {
        let next = ((2 * n + 1) as f64 * t * cur - n as f64 * prev) / (n + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// Value and derivative of `L_k(t)` on [-1, 1].
fn legendre_with_deriv(k: usize, t: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = t;
    for n in 1..k {
        let next = ((2 * n + 1) as f64 * t * cur - n as f64 * prev) / (n + 1) as f64;
        prev = cur;
        cur = next;
    }
    // (1 - t^2) L_k' = k (L_{k-1} - t L_k)
    let denom = 1.0 - t * t;
    let deriv = if denom.abs() > 1e-10 {
        k as f64 * (prev - t * cur) / denom
    } else {
        // Only reached at t = +-1, where L_k' = (+-1)^{k+1} k(k+1)/2.
        let sign: f64 = if t > 0.0 { 1.0 } else { -1.0 };
        sign.powi(k as i32 + 1) * (k * (k + 1)) as f64 / 2.0
    };
    (cur, deriv)
}

/// Orthonormal shifted Legendre polynomial `P_j(x)` on [0, 1].
pub fn shifted_legendre(degree: usize, x: f64) -> f64 {
    ((2 * degree + 1) as f64).sqrt() * legendre(degree, 2.0 * x - 1.0)
}

/// Primitive `int_0^c P_j(x) dx` of the orthonormal shifted basis.
///
/// For `j >= 1` this is `(L_{j+1}(2c-1) - L_{j-1}(2c-1)) / (2 sqrt(2j+1))`,
/// which vanishes at both endpoints; for `j = 0` it is `c`.
pub fn shifted_legendre_primitive(degree: usize, c: f64) -> f64 {
    if degree == 0 {
        return c;
    }
    let t = 2.0 * c - 1.0;
    let hi = legendre(degree + 1, t);
    let lo = legendre(degree - 1, t);
    (hi - lo) / (2.0 * ((2 * degree + 1) as f64).sqrt())
}

/// A Gauss-Legendre rule on (0, 1): nodes in increasing order, positive
/// weights summing to one, both symmetric about 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub k: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Approximate `int_0^1 f`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&c, &b)| b * f(c))
            .sum()
    }
}

/// Build the k-point Gauss-Legendre rule on (0, 1).
///
/// Roots of `L_k` are found by Newton iteration from Chebyshev initial
/// guesses; each root converges in a handful of iterations for all supported
/// k. Only the positive half is computed and then mirrored so the returned
/// rule is symmetric to the last bit.
pub fn gauss_legendre(k: usize) -> Result<QuadratureRule> {
    if k == 0 || k > MAX_NODES {
        return Err(Error::InvalidParams { k, s: k });
    }
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];

    // Roots come out in decreasing order of t for i = 0, 1, ...; index i = 0
    // is the largest root. Compute those with t >= 0.
    let half = (k + 1) / 2;
    for i in 0..half {
        let (t, p_deriv) = if 2 * i + 1 == k {
            // Middle root of an odd rule is exactly zero.
            let (_, d) = legendre_with_deriv(k, 0.0);
            (0.0, d)
        } else {
            let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
            let mut converged = false;
            for _ in 0..100 {
                let (p, d) = legendre_with_deriv(k, t);
                let dt = p / d;
                t -= dt;
                if dt.abs() <= 1e-16 * (1.0 + t.abs()) {
                    converged = true;
                    break;
                }
            }
            // One polishing step, then the residual check below decides.
            let (p, d) = legendre_with_deriv(k, t);
            t -= p / d;
            let deriv = d;
            if !converged {
                let (residual, _) = legendre_with_deriv(k, t);
                if residual.abs() > 1e-13 * d.abs().max(1.0) {
                    return Err(Error::NodeNonConvergence {
                        k,
                        index: i,
                        residual: residual.abs(),
                    });
                }
            }
            (t, deriv)
        };
        // Weight on (-1,1) is 2 / ((1-t^2) L_k'(t)^2); halves on (0,1).
        let w = 2.0 / ((1.0 - t * t) * p_deriv * p_deriv);
        nodes[k - 1 - i] = 0.5 * (1.0 + t);
        nodes[i] = 0.5 * (1.0 - t);
        weights[k - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }

    Ok(QuadratureRule { k, nodes, weights })
}
