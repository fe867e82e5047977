//! HBVM(k, s) coefficient matrices.
//!
//! With `P` the k x s matrix of orthonormal shifted Legendre values at the
//! Gauss nodes, `I` the k x s matrix of their primitives, and `O = diag(b)`,
//! the Butcher matrix is `A = I P^T O`. For `k = s` this reproduces the
//! s-stage Gauss collocation method exactly; for `k > s` the stage space
//! stays s-dimensional while the quadrature sharpens.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::legendre::{self, QuadratureRule};

/// Coefficients of an HBVM(k, s) method, plus the small matrices the stage
/// solver needs.
#[derive(Debug, Clone)]
pub struct HbvmTableau {
    pub k: usize,
    pub s: usize,
    pub rule: QuadratureRule,
    /// k x s primitives: `is_mat[(i, j)] = int_0^{c_i} P_j`.
    pub is_mat: DMatrix<f64>,
    /// k x s values: `ps_mat[(i, j)] = P_j(c_i)`.
    pub ps_mat: DMatrix<f64>,
    /// k x k Butcher matrix `A = I P^T O`.
    pub a_mat: DMatrix<f64>,
    /// s x s reduced matrix `X = P^T O I`; its eigenvalues match the s-stage
    /// Gauss method and it is the core of the simplified Newton iteration.
    pub x_mat: DMatrix<f64>,
    /// Transposed primitives (s x k), kept for the solver's stage assembly.
    pub is_t: DMatrix<f64>,
    /// k x s product `O P`, kept for the solver's coefficient projection.
    pub om_ps: DMatrix<f64>,
}

/// Build the HBVM(k, s) tableau. Requires `1 <= s <= k <= 64`.
pub fn build_tableau(k: usize, s: usize) -> Result<HbvmTableau> {
    if s == 0 || s > k || k > legendre::MAX_NODES {
        return Err(Error::InvalidParams { k, s });
    }
    let rule = legendre::gauss_legendre(k)?;
    let is_mat = DMatrix::from_fn(k, s, |i, j| {
        legendre::shifted_legendre_primitive(j, rule.nodes[i])
    });
    let ps_mat = DMatrix::from_fn(k, s, |i, j| legendre::shifted_legendre(j, rule.nodes[i]));
    let om_ps = DMatrix::from_fn(k, s, |i, j| rule.weights[i] * ps_mat[(i, j)]);
    let a_mat = &is_mat * om_ps.transpose();
    let x_mat = om_ps.transpose() * &is_mat;
    let is_t = is_mat.transpose();
    Ok(HbvmTableau {
        k,
        s,
        rule,
        is_mat,
        ps_mat,
        a_mat,
        x_mat,
        is_t,
        om_ps,
    })
}

/// Default quadrature size for a given s: either from the Hamiltonian's
/// polynomial degree `nu` (so that H is integrated exactly), or a generous
/// floor when the degree is unknown or infinite.
pub fn k_rule(s: usize, hamiltonian_degree: Option<usize>) -> usize {
    match hamiltonian_degree {
        Some(nu) => ((nu * s).div_ceil(2)).max(s),
        None => (s + 2).max(20),
    }
}
