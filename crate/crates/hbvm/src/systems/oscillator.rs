//! Harmonic oscillator, the canonical smoke-test system.

use nalgebra::{DVector, Matrix2};

use crate::system::{HamiltonianSystem, LinearPart, PairBlock};

/// `H = (p^2 + omega^2 q^2)/2` with state `(q, p)`.
pub struct HarmonicOscillator {
    pub omega: f64,
    linear: LinearPart,
}

impl HarmonicOscillator {
    pub fn new(omega: f64) -> Self {
        HarmonicOscillator {
            omega,
            linear: LinearPart::PairBlocks(vec![PairBlock {
                rows: [0, 1],
                block: Matrix2::new(0.0, 1.0, -omega * omega, 0.0),
            }]),
        }
    }
}

impl HamiltonianSystem for HarmonicOscillator {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        out[0] = y[1];
        out[1] = -self.omega * self.omega * y[0];
    }

    fn linear_part(&self) -> &LinearPart {
        &self.linear
    }

    fn hamiltonian(&self, y: &DVector<f64>) -> f64 {
        0.5 * (y[1] * y[1] + self.omega * self.omega * y[0] * y[0])
    }
}
