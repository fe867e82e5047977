//! Semi-discrete nonlinear Schroedinger equation
//! `i psi_t + psi_xx + f'(|psi|^2) psi = 0` with `psi = u + i v`, projected
//! onto a truncated Fourier basis.
//!
//! With `q`, `p` the coefficients of `u`, `v` and `L = diag(omega^2)`:
//!
//! ```text
//! H(q, p) = 1/2 (q^T L q + p^T L p) - 1/2 trap(f(sigma)),  sigma = u^2 + v^2,
//! q' =  L p - proj(f'(sigma) v),
//! p' = -L q + proj(f'(sigma) u).
//! ```
//!
//! Beyond H the flow conserves the mass `M1 = trap(sigma)` and momentum
//! `M2 = 2 q^T D p`; both are quadratic, so any method of this crate keeps
//! them to round-off. The benchmark uses the cubic focusing case
//! `f(sigma) = sigma^2`.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::fourier::FourierBasis;
use crate::system::{HamiltonianSystem, LinearPart, PairBlock};

pub struct NlseSystem {
    basis: FourierBasis,
    f: fn(f64) -> f64,
    f_deriv: fn(f64) -> f64,
    lap: Vec<f64>,
    linear: LinearPart,
}

impl NlseSystem {
    pub fn new(basis: FourierBasis, f: fn(f64) -> f64, f_deriv: fn(f64) -> f64) -> Self {
        let lap = basis.laplacian_diag();
        let ncoef = basis.n_coeffs();
        let blocks = (0..ncoef)
            .map(|i| PairBlock {
                rows: [i, ncoef + i],
                block: Matrix2::new(0.0, lap[i], -lap[i], 0.0),
            })
            .collect();
        NlseSystem {
            basis,
            f,
            f_deriv,
            lap,
            linear: LinearPart::PairBlocks(blocks),
        }
    }

    /// Cubic focusing nonlinearity `f(sigma) = sigma^2`.
    pub fn cubic(basis: FourierBasis) -> Self {
        fn f(s: f64) -> f64 {
            s * s
        }
        fn fp(s: f64) -> f64 {
            2.0 * s
        }
        Self::new(basis, f, fp)
    }

    /// Free Schroedinger equation (`f = 0`), mostly for tests.
    pub fn free(basis: FourierBasis) -> Self {
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

    /// Analytic gradient of H: `(L q - proj(f'(sigma) u), L p - proj(f'(sigma) v))`.
    pub fn grad_hamiltonian(&self, y: &DVector<f64>) -> DVector<f64> {
        let nc = self.ncoef();
        let q = y.rows(0, nc).clone_owned();
        let p = y.rows(nc, nc).clone_owned();
        let u = self.basis.eval_on_grid(&q).expect("layout");
        let v = self.basis.eval_on_grid(&p).expect("layout");
        let fu: Vec<f64> = u
            .iter()
            .zip(v.iter())
            .map(|(&a, &b)| (self.f_deriv)(a * a + b * b) * a)
            .collect();
        let fv: Vec<f64> = u
            .iter()
            .zip(v.iter())
            .map(|(&a, &b)| (self.f_deriv)(a * a + b * b) * b)
            .collect();
        let pu = self.basis.project(&fu).expect("grid resolution");
        let pv = self.basis.project(&fv).expect("grid resolution");
        let mut g = DVector::zeros(2 * nc);
        for i in 0..nc {
            g[i] = self.lap[i] * q[i] - pu[i];
            g[nc + i] = self.lap[i] * p[i] - pv[i];
        }
        g
    }
}

impl HamiltonianSystem for NlseSystem {
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
        let u = self.basis.grid_matrix() * q;
        let v = self.basis.grid_matrix() * p;
        // f'(sigma) u and f'(sigma) v on the grid, reusing the two buffers.
        let mut nu = u;
        let mut nv = v;
        for (a, b) in nu.iter_mut().zip(nv.iter_mut()) {
            let fp = (self.f_deriv)(*a * *a + *b * *b);
            *a *= fp;
            *b *= fp;
        }
        let mut pu = DMatrix::zeros(nc, cols);
        let mut pv = DMatrix::zeros(nc, cols);
        pu.gemm_tr(1.0, self.basis.weighted_grid_matrix(), &nu, 0.0);
        pv.gemm_tr(1.0, self.basis.weighted_grid_matrix(), &nv, 0.0);
        for c in 0..cols {
            for i in 0..nc {
                out[(i, c)] = self.lap[i] * p[(i, c)] - pv[(i, c)];
                out[(nc + i, c)] = -self.lap[i] * q[(i, c)] + pu[(i, c)];
            }
        }
    }

    fn linear_part(&self) -> &LinearPart {
        &self.linear
    }

    fn hamiltonian(&self, y: &DVector<f64>) -> f64 {
        let nc = self.ncoef();
        let q = y.rows(0, nc).clone_owned();
        let p = y.rows(nc, nc).clone_owned();
        let u = self.basis.eval_on_grid(&q).expect("layout");
        let v = self.basis.eval_on_grid(&p).expect("layout");
        let fs: Vec<f64> = u
            .iter()
            .zip(v.iter())
            .map(|(&a, &b)| (self.f)(a * a + b * b))
            .collect();
        let mut quad = 0.0;
        for i in 0..nc {
            quad += self.lap[i] * (q[i] * q[i] + p[i] * p[i]);
        }
        0.5 * quad - 0.5 * self.basis.trapezoid(&fs)
    }

    fn invariants(&self, y: &DVector<f64>) -> Vec<(&'static str, f64)> {
        let nc = self.ncoef();
        let q = y.rows(0, nc).clone_owned();
        let p = y.rows(nc, nc).clone_owned();
        let u = self.basis.eval_on_grid(&q).expect("layout");
        let v = self.basis.eval_on_grid(&p).expect("layout");
        let sigma: Vec<f64> = u
            .iter()
            .zip(v.iter())
            .map(|(&a, &b)| a * a + b * b)
            .collect();
        let m1 = self.basis.trapezoid(&sigma);
        let m2 = 2.0 * q.dot(&self.basis.apply_d(&p));
        vec![("M1", m1), ("M2", m2)]
    }
}
