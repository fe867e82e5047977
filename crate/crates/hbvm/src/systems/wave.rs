//! Semi-discrete nonlinear wave equation `u_tt = u_xx - f'(u)` on a periodic
//! interval, projected onto a truncated Fourier basis.
//!
//! With `q` the coefficients of `u` and `p = q'` those of `u_t`, the system
//! is canonical with
//!
//! ```text
//! H(q, p) = 1/2 p^T p + 1/2 q^T L q + trap(f(u)),   L = diag(omega^2),
//! ```
//!
//! i.e. `q' = p`, `p' = -L q - proj(f'(u))`. The sine-Gordon benchmark uses
//! `f(u) = 1 - cos u`.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::fourier::FourierBasis;
use crate::system::{HamiltonianSystem, LinearPart, PairBlock};

pub struct WaveSystem {
    basis: FourierBasis,
    potential: fn(f64) -> f64,
    potential_deriv: fn(f64) -> f64,
    lap: Vec<f64>,
    linear: LinearPart,
}

impl WaveSystem {
    pub fn new(basis: FourierBasis, potential: fn(f64) -> f64, potential_deriv: fn(f64) -> f64) -> Self {
        let lap = basis.laplacian_diag();
        let ncoef = basis.n_coeffs();
        let blocks = (0..ncoef)
            .map(|i| PairBlock {
                rows: [i, ncoef + i],
                block: Matrix2::new(0.0, 1.0, -lap[i], 0.0),
            })
            .collect();
        WaveSystem {
            basis,
            potential,
            potential_deriv,
            lap,
            linear: LinearPart::PairBlocks(blocks),
        }
    }

    pub fn sine_gordon(basis: FourierBasis) -> Self {
        fn f(u: f64) -> f64 {
            1.0 - u.cos()
        }
        fn fp(u: f64) -> f64 {
            u.sin()
        }
        Self::new(basis, f, fp)
    }

    /// Free linear wave equation (`f = 0`), mostly for tests.
    pub fn linear_wave(basis: FourierBasis) -> Self {
        fn zero(_: f64) -> f64 {
            0.0
        }
        Self::new(basis, zero, zero)
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    fn ncoef(&self) -> usize {
        self.basis.n_coeffs()
    }

    /// Analytic gradient of H, for consistency checks against finite
    /// differences: `(L q + proj(f'(u)), p)`.
    pub fn grad_hamiltonian(&self, y: &DVector<f64>) -> DVector<f64> {
        let nc = self.ncoef();
        let q = y.rows(0, nc).clone_owned();
        let u = self.basis.eval_on_grid(&q).expect("layout");
        let fp: Vec<f64> = u.iter().map(|&x| (self.potential_deriv)(x)).collect();
        let proj = self
            .basis
            .project(&fp)
            .expect("projection grid fixed at construction");
        let mut g = DVector::zeros(2 * nc);
        for i in 0..nc {
            g[i] = self.lap[i] * q[i] + proj[i];
            g[nc + i] = y[nc + i];
        }
        g
    }
}

impl HamiltonianSystem for WaveSystem {
    fn dim(&self) -> usize {
        2 * self.ncoef()
    }

    fn rhs(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        let states = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
        let mut o = DMatrix::zeros(y.len(), 1);
        self.rhs_batch(&states, &mut o);
        out.copy_from(&o.column(0));
    }

    fn rhs_batch(&self, states: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let nc = self.ncoef();
        let cols = states.ncols();
        let q = states.rows(0, nc);
        let p = states.rows(nc, nc);
        // q' = p.
        out.rows_mut(0, nc).copy_from(&p);
        // u on the grid for every stage at once.
        let mut u = self.basis.grid_matrix() * q;
        for x in u.iter_mut() {
            *x = (self.potential_deriv)(*x);
        }
        // proj(f'(u)) for every stage.
        let mut proj = DMatrix::zeros(nc, cols);
        proj.gemm_tr(1.0, self.basis.weighted_grid_matrix(), &u, 0.0);
        let mut pdot = out.rows_mut(nc, nc);
        for c in 0..cols {
            for i in 0..nc {
                pdot[(i, c)] = -self.lap[i] * q[(i, c)] - proj[(i, c)];
            }
        }
    }

    fn linear_part(&self) -> &LinearPart {
        &self.linear
    }

    fn hamiltonian(&self, y: &DVector<f64>) -> f64 {
        let nc = self.ncoef();
        let q = y.rows(0, nc).clone_owned();
        let u = self.basis.eval_on_grid(&q).expect("layout");
        let fvals: Vec<f64> = u.iter().map(|&x| (self.potential)(x)).collect();
        let mut quad = 0.0;
        for i in 0..nc {
            quad += y[nc + i] * y[nc + i] + self.lap[i] * q[i] * q[i];
        }
        0.5 * quad + self.basis.trapezoid(&fvals)
    }
}
