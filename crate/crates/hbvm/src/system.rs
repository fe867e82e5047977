//! The ODE interface the integrators work against: canonical Hamiltonian
//! systems `y' = f(y)` with a declared linear part.

use nalgebra::{DMatrix, DVector, Matrix2};

/// Structure of the linear term of the vector field, `f(y) = L y + g(y)`.
///
/// The split is by structure, not by Jacobian: `L` is the part of the field
/// that is linear in `y` by construction (e.g. the discretized dispersive
/// term of a PDE), and the simplified Newton solver builds its approximate
/// Jacobian from it alone.
#[derive(Debug, Clone)]
pub enum LinearPart {
    /// No linear term; Newton degenerates to fixed point iteration.
    Zero,
    /// Arbitrary dense matrix.
    Dense(DMatrix<f64>),
    /// Block diagonal over disjoint index pairs. Indices absent from every
    /// pair must have zero rows and columns in `L`. All the spectral
    /// semi-discretizations in this crate take this shape, with one 2x2
    /// block per Fourier mode, which keeps the Newton factorization linear
    /// in the number of modes.
    PairBlocks(Vec<PairBlock>),
}

/// One 2x2 diagonal block of a [`LinearPart::PairBlocks`] operator, acting on
/// the state components `rows[0]` and `rows[1]`.
#[derive(Debug, Clone, Copy)]
pub struct PairBlock {
    pub rows: [usize; 2],
    pub block: Matrix2<f64>,
}

impl LinearPart {
    /// `out += L y`.
    pub fn apply_add(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            LinearPart::Zero => {}
            LinearPart::Dense(l) => out.gemv(1.0, l, y, 1.0),
            LinearPart::PairBlocks(blocks) => {
                for pb in blocks {
                    let [i, j] = pb.rows;
                    let (yi, yj) = (y[i], y[j]);
                    out[i] += pb.block[(0, 0)] * yi + pb.block[(0, 1)] * yj;
                    out[j] += pb.block[(1, 0)] * yi + pb.block[(1, 1)] * yj;
                }
            }
        }
    }

    /// `L y` as a fresh vector.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(y.len());
        self.apply_add(y, &mut out);
        out
    }

    /// Dense representation, mainly for tests and small systems.
    pub fn to_dense(&self, dim: usize) -> DMatrix<f64> {
        match self {
            LinearPart::Zero => DMatrix::zeros(dim, dim),
            LinearPart::Dense(l) => l.clone(),
            LinearPart::PairBlocks(blocks) => {
                let mut m = DMatrix::zeros(dim, dim);
                for pb in blocks {
                    let [i, j] = pb.rows;
                    m[(i, i)] += pb.block[(0, 0)];
                    m[(i, j)] += pb.block[(0, 1)];
                    m[(j, i)] += pb.block[(1, 0)];
                    m[(j, j)] += pb.block[(1, 1)];
                }
                m
            }
        }
    }
}

/// A finite-dimensional Hamiltonian system.
///
/// Implementations must keep `rhs` consistent with `linear_part`: with the
/// nonlinearity switched off (however the concrete type expresses that),
/// `rhs(y)` must equal `linear_part().apply(y)`.
pub trait HamiltonianSystem {
    fn dim(&self) -> usize;

    /// Vector field `f(y)` into `out`.
    fn rhs(&self, y: &DVector<f64>, out: &mut DVector<f64>);

    /// Vector field applied to each column of `states`. The default loops
    /// over columns; spectral systems override this with batched matrix
    /// products, which is where the per-step cost concentrates.
    fn rhs_batch(&self, states: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let dim = self.dim();
        let mut y = DVector::zeros(dim);
        let mut f = DVector::zeros(dim);
        for c in 0..states.ncols() {
            y.copy_from(&states.column(c));
            self.rhs(&y, &mut f);
            out.column_mut(c).copy_from(&f);
        }
    }

    /// Structural linear term of the field.
    fn linear_part(&self) -> &LinearPart;

    /// Conserved energy.
    fn hamiltonian(&self, y: &DVector<f64>) -> f64;

    /// Further conserved quantities, as (name, value) pairs. Empty by
    /// default.
    fn invariants(&self, _y: &DVector<f64>) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pair_blocks_match_dense_apply() {
        let blocks = vec![
            PairBlock {
                rows: [0, 2],
                block: Matrix2::new(0.0, 1.0, -4.0, 0.0),
            },
            PairBlock {
                rows: [1, 3],
                block: Matrix2::new(0.5, -1.0, 2.0, 0.0),
            },
        ];
        let lp = LinearPart::PairBlocks(blocks);
        let dense = lp.to_dense(5);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 7.0]);
        let via_blocks = lp.apply(&y);
        let via_dense = &dense * &y;
        for i in 0..5 {
            assert_abs_diff_eq!(via_blocks[i], via_dense[i], epsilon = 1e-15);
        }
        // Unpaired index 4 is untouched.
        assert_eq!(via_blocks[4], 0.0);
    }
}
