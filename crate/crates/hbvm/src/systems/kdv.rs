//! Semi-discrete Korteweg-de Vries equation in Poisson form
//! `u_t = d/dx (delta H / delta u)` with
//! `H[u] = int (-nu/2 u_x^2 + mu/6 u^3) dx`, i.e.
//! `u_t = nu u_xxx + mu u u_x`. The benchmark soliton problem has
//! `nu = -eps`, `mu = -1`.
//!
//! The mean of u is a Casimir of the bracket and never moves; the state `y`
//! carries only the 2N oscillatory coefficients, paired as (cos, sin). With
//! `d_j = 2 pi j/(b-a)` and `Dh = diag(d_j)`:
//!
//! ```text
//! H(y) = -nu/2 y^T (Dh^2 x I2) y + mu/6 trap(u^3),
//! y'   = (Dh x J2) grad H(y),
//! grad H = -nu (Dh^2 x I2) y + mu/2 proj(u^2).
//! ```

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::fourier::FourierBasis;
use crate::system::{HamiltonianSystem, LinearPart, PairBlock};

pub struct KdvSystem {
    basis: FourierBasis,
    pub nu: f64,
    pub mu: f64,
    /// Conserved mean value of u; enters the nonlinear term and the energy.
    pub u_mean: f64,
    /// Frequency of each coefficient.
    freq: Vec<f64>,
    linear: LinearPart,
}

impl KdvSystem {
    pub fn new(basis: FourierBasis, nu: f64, mu: f64, u_mean: f64) -> Self {
        let freq = basis.frequencies().to_vec();
        let blocks = basis
            .mode_pairs()
            .map(|(ia, ib, d)| {
                let c = nu * d * d * d;
                PairBlock {
                    rows: [ia, ib],
                    // (Dh x J2) applied to the linear gradient -nu Dh^2 y.
                    block: Matrix2::new(0.0, -c, c, 0.0),
                }
            })
            .collect();
        KdvSystem {
            basis,
            nu,
            mu,
            u_mean,
            freq,
            linear: LinearPart::PairBlocks(blocks),
        }
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    /// Grid values of u for a coefficient state.
    pub fn u_grid(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut u = self.basis.eval_on_grid(y).expect("layout");
        u.add_scalar_mut(self.u_mean);
        u
    }

    /// Analytic gradient of H.
    pub fn grad_hamiltonian(&self, y: &DVector<f64>) -> DVector<f64> {
        let u = self.u_grid(y);
        let sq: Vec<f64> = u.iter().map(|&x| x * x).collect();
        let proj = self.basis.project(&sq).expect("grid resolution");
        DVector::from_fn(y.len(), |i, _| {
            -self.nu * self.freq[i] * self.freq[i] * y[i] + 0.5 * self.mu * proj[i]
        })
    }
}

impl HamiltonianSystem for KdvSystem {
    fn dim(&self) -> usize {
        self.basis.n_coeffs()
    }

    fn rhs(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        let g = self.grad_hamiltonian(y);
        out.copy_from(&self.basis.apply_d(&g));
    }

    fn rhs_batch(&self, states: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let nc = self.dim();
        let cols = states.ncols();
        let mut u = self.basis.grid_matrix() * states;
        for x in u.iter_mut() {
            let v = *x + self.u_mean;
            *x = v * v;
        }
        let mut proj = DMatrix::zeros(nc, cols);
        proj.gemm_tr(1.0, self.basis.weighted_grid_matrix(), &u, 0.0);
        // gradient, then the skew pairing, column by column over all pairs.
        for c in 0..cols {
            for (ia, ib, d) in self.basis.mode_pairs() {
                let ga = -self.nu * self.freq[ia] * self.freq[ia] * states[(ia, c)]
                    + 0.5 * self.mu * proj[(ia, c)];
                let gb = -self.nu * self.freq[ib] * self.freq[ib] * states[(ib, c)]
                    + 0.5 * self.mu * proj[(ib, c)];
                out[(ia, c)] = d * gb;
                out[(ib, c)] = -d * ga;
            }
        }
    }

    fn linear_part(&self) -> &LinearPart {
        &self.linear
    }

    fn hamiltonian(&self, y: &DVector<f64>) -> f64 {
        let u = self.u_grid(y);
        let cube: Vec<f64> = u.iter().map(|&x| x * x * x).collect();
        let mut quad = 0.0;
        for i in 0..y.len() {
            quad += self.freq[i] * self.freq[i] * y[i] * y[i];
        }
        -0.5 * self.nu * quad + self.mu / 6.0 * self.basis.trapezoid(&cube)
    }
}
