//! Orthonormal trigonometric bases on a periodic interval [a, b], sampled on
//! a uniform grid, with trapezoidal quadrature for inner products.
//!
//! With `L = b - a` the basis functions are
//!
//! ```text
//! c_0(x) = 1/sqrt(L),
//! c_j(x) = sqrt(2/L) cos(2 pi j (x - a)/L),
//! s_j(x) = sqrt(2/L) sin(2 pi j (x - a)/L),   j = 1..N.
//! ```
//!
//! Two stacking orders are used by the semi-discretizations: the wave-type
//! systems carry the constant mode and order each pair as (sin, cos); the
//! KdV system drops the constant mode (its coefficient is conserved) and
//! orders pairs as (cos, sin).
//!
//! Grid values of the basis are built from the angle `2 pi ((i j) mod m)/m`
//! rather than from `x_i` directly, so periodicity across the seam holds to
//! the last bit and no accuracy is lost at high mode numbers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Coefficient stacking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `(a_0, b_1, a_1, b_2, a_2, ...)`: constant first, then (sin, cos) per
    /// mode. 2N+1 coefficients.
    WaveNls,
    /// `(a_1, b_1, a_2, b_2, ...)`: no constant mode, (cos, sin) per mode.
    /// 2N coefficients.
    Kdv,
}

/// Truncated Fourier basis bound to a uniform grid `x_i = a + i (b-a)/m`,
/// `i = 0..=m`.
#[derive(Debug, Clone)]
pub struct FourierBasis {
    pub layout: Layout,
    pub a: f64,
    pub b: f64,
    /// Number of harmonics N.
    pub n_modes: usize,
    /// Number of grid intervals; the grid has m+1 points with the endpoints
    /// identified by periodicity.
    pub m: usize,
    grid: Vec<f64>,
    /// (m+1) x n_coeffs basis values on the grid.
    wg: DMatrix<f64>,
    /// wg with rows scaled by the trapezoidal weights; projections are
    /// `wg_w^T g`.
    wg_w: DMatrix<f64>,
    /// Trapezoidal weights including the cell width.
    trap_w: DVector<f64>,
    /// Base frequency `2 pi j / (b - a)` of each coefficient (0 for the
    /// constant mode).
    omega: Vec<f64>,
}

impl FourierBasis {
    pub fn new(layout: Layout, a: f64, b: f64, n_modes: usize, m: usize) -> Result<Self> {
        if !(b > a) || n_modes == 0 || m < 2 {
            return Err(Error::InvalidSpec(format!(
                "bad basis parameters: a={a}, b={b}, N={n_modes}, m={m}"
            )));
        }
        let len = b - a;
        let dx = len / m as f64;
        let grid: Vec<f64> = (0..=m).map(|i| a + i as f64 * dx).collect();

        let n_coeffs = match layout {
            Layout::WaveNls => 2 * n_modes + 1,
            Layout::Kdv => 2 * n_modes,
        };
        let norm0 = (1.0 / len).sqrt();
        let norm = (2.0 / len).sqrt();
        let base = 2.0 * std::f64::consts::PI / len;

        let mut wg = DMatrix::zeros(m + 1, n_coeffs);
        let mut omega = vec![0.0; n_coeffs];
        // Angle on the unit circle for grid point i and mode j, reduced by
        // periodicity before any floating point enters.
        let angle = |i: usize, j: usize| {
            2.0 * std::f64::consts::PI * (((i * j) % m) as f64) / m as f64
        };
        match layout {
            Layout::WaveNls => {
                for i in 0..=m {
                    wg[(i, 0)] = norm0;
                }
                for j in 1..=n_modes {
                    omega[2 * j - 1] = base * j as f64;
                    omega[2 * j] = base * j as f64;
                    for i in 0..=m {
                        let th = angle(i, j);
                        wg[(i, 2 * j - 1)] = norm * th.sin();
                        wg[(i, 2 * j)] = norm * th.cos();
                    }
                }
            }
            Layout::Kdv => {
                for j in 1..=n_modes {
                    omega[2 * j - 2] = base * j as f64;
                    omega[2 * j - 1] = base * j as f64;
                    for i in 0..=m {
                        let th = angle(i, j);
                        wg[(i, 2 * j - 2)] = norm * th.cos();
                        wg[(i, 2 * j - 1)] = norm * th.sin();
                    }
                }
            }
        }

        let mut trap_w = DVector::from_element(m + 1, dx);
        trap_w[0] = 0.5 * dx;
        trap_w[m] = 0.5 * dx;

        let mut wg_w = wg.clone();
        for i in 0..=m {
            for c in 0..n_coeffs {
                wg_w[(i, c)] *= trap_w[i];
            }
        }

        Ok(FourierBasis {
            layout,
            a,
            b,
            n_modes,
            m,
            grid,
            wg,
            wg_w,
            trap_w,
            omega,
        })
    }

    pub fn n_coeffs(&self) -> usize {
        self.wg.ncols()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Basis values on the grid, one column per coefficient.
    pub fn grid_matrix(&self) -> &DMatrix<f64> {
        &self.wg
    }

    /// Grid matrix pre-scaled by the quadrature weights (projection matrix).
    pub fn weighted_grid_matrix(&self) -> &DMatrix<f64> {
        &self.wg_w
    }

    pub fn quadrature_weights(&self) -> &DVector<f64> {
        &self.trap_w
    }

    /// Base frequency of each coefficient.
    pub fn frequencies(&self) -> &[f64] {
        &self.omega
    }

    /// Composite trapezoidal integral of grid samples (m+1 values).
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.m + 1, "trapezoid needs m+1 samples");
        values
            .iter()
            .zip(self.trap_w.iter())
            .map(|(g, w)| g * w)
            .sum()
    }

    /// Mean value of grid samples over the interval.
    pub fn mean(&self, values: &[f64]) -> f64 {
        self.trapezoid(values) / (self.b - self.a)
    }

    /// Reconstruct grid values from coefficients.
    pub fn eval_on_grid(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        if coeffs.len() != self.n_coeffs() {
            return Err(Error::LayoutMismatch {
                expected: self.n_coeffs(),
                got: coeffs.len(),
            });
        }
        Ok(&self.wg * coeffs)
    }

    /// Pointwise evaluation at arbitrary x (reference path; the grid matrix
    /// is the fast one).
    pub fn eval_at(&self, coeffs: &DVector<f64>, x: f64) -> f64 {
        assert_eq!(coeffs.len(), self.n_coeffs());
        let len = self.b - self.a;
        let norm0 = (1.0 / len).sqrt();
        let norm = (2.0 / len).sqrt();
        let base = 2.0 * std::f64::consts::PI / len;
        let mut acc = 0.0;
        match self.layout {
            Layout::WaveNls => {
                acc += coeffs[0] * norm0;
                for j in 1..=self.n_modes {
                    let th = base * j as f64 * (x - self.a);
                    acc += coeffs[2 * j - 1] * norm * th.sin();
                    acc += coeffs[2 * j] * norm * th.cos();
                }
            }
            Layout::Kdv => {
                for j in 1..=self.n_modes {
                    let th = base * j as f64 * (x - self.a);
                    acc += coeffs[2 * j - 2] * norm * th.cos();
                    acc += coeffs[2 * j - 1] * norm * th.sin();
                }
            }
        }
        acc
    }

    /// Project grid samples onto the basis by trapezoidal quadrature.
    /// Requires `m >= 2N + 1` so that products of resolved modes cannot
    /// alias onto each other.
    pub fn project(&self, values: &[f64]) -> Result<DVector<f64>> {
        if self.m < 2 * self.n_modes + 1 {
            return Err(Error::AliasingRisk {
                m: self.m,
                needed: 2 * self.n_modes + 1,
            });
        }
        if values.len() != self.m + 1 {
            return Err(Error::LayoutMismatch {
                expected: self.m + 1,
                got: values.len(),
            });
        }
        let g = DVector::from_column_slice(values);
        Ok(self.wg_w.transpose() * g)
    }

    /// Index pairs and base frequency of each oscillatory mode, in the
    /// layout's native order within the pair.
    pub fn mode_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let base = 2.0 * std::f64::consts::PI / (self.b - self.a);
        let offset = match self.layout {
            Layout::WaveNls => 1,
            Layout::Kdv => 0,
        };
        (1..=self.n_modes).map(move |j| {
            let first = 2 * j - 2 + offset;
            (first, first + 1, base * j as f64)
        })
    }

    /// Multiply a coefficient vector by the block-diagonal skew operator
    /// `diag(omega_j J2)` over the mode pairs, `J2 = [[0, 1], [-1, 0]]`; the
    /// constant mode (if present) maps to zero. For the wave layout this is
    /// the first-derivative matrix D; for the KdV layout it is the
    /// derivative-with-J2 factor of the flow.
    pub fn apply_d(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.n_coeffs());
        let mut out = DVector::zeros(v.len());
        for (ia, ib, w) in self.mode_pairs() {
            out[ia] = w * v[ib];
            out[ib] = -w * v[ia];
        }
        out
    }

    /// Diagonal of `D^T D`: the square of each coefficient's frequency.
    pub fn laplacian_diag(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w * w).collect()
    }
}

/// Semi-discrete state in a named coefficient arrangement.
#[derive(Debug, Clone)]
pub enum SpectralCoefficients {
    /// Positions and momenta of the wave-type systems, each of length 2N+1.
    WaveNls { q: DVector<f64>, p: DVector<f64> },
    /// Oscillatory coefficients of the KdV solution plus the conserved mean
    /// of u (the constant-mode content, which the flow never changes).
    Kdv { y: DVector<f64>, mean: f64 },
}

impl SpectralCoefficients {
    /// Flatten into the state vector the integrator advances.
    pub fn pack(&self) -> DVector<f64> {
        match self {
            SpectralCoefficients::WaveNls { q, p } => {
                let mut out = DVector::zeros(q.len() + p.len());
                out.rows_mut(0, q.len()).copy_from(q);
                out.rows_mut(q.len(), p.len()).copy_from(p);
                out
            }
            SpectralCoefficients::Kdv { y, .. } => y.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn orthonormal_under_trapezoid() {
        for (layout, m) in [
            (Layout::WaveNls, 17),
            (Layout::WaveNls, 40),
            (Layout::Kdv, 25),
        ] {
            let basis = FourierBasis::new(layout, -1.5, 2.5, 8, m).unwrap();
            let gram = basis.weighted_grid_matrix().transpose() * basis.grid_matrix();
            for i in 0..basis.n_coeffs() {
                for j in 0..basis.n_coeffs() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(gram[(i, j)], expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_mode_normalization() {
        // On [0, 2 pi] the constant basis function is 1/sqrt(2 pi).
        let basis = FourierBasis::new(Layout::WaveNls, 0.0, 2.0 * std::f64::consts::PI, 3, 13)
            .unwrap();
        let expect = (1.0 / (2.0 * std::f64::consts::PI)).sqrt();
        assert_abs_diff_eq!(basis.grid_matrix()[(0, 0)], expect, epsilon = 1e-16);
        assert_abs_diff_eq!(expect, 0.3989422804014327, epsilon = 1e-15);
    }

    #[test]
    fn grid_values_periodic_to_the_bit() {
        let basis = FourierBasis::new(Layout::WaveNls, -50.0, 50.0, 300, 601).unwrap();
        let wg = basis.grid_matrix();
        for c in 0..basis.n_coeffs() {
            assert_eq!(wg[(0, c)], wg[(601, c)]);
        }
        let kdv = FourierBasis::new(Layout::Kdv, -3.0, 5.0, 300, 901).unwrap();
        let wg = kdv.grid_matrix();
        for c in 0..kdv.n_coeffs() {
            assert_eq!(wg[(0, c)], wg[(901, c)]);
        }
    }

    #[test]
    fn round_trip_recovers_band_limited_functions() {
        let mut rng = StdRng::seed_from_u64(7);
        for layout in [Layout::WaveNls, Layout::Kdv] {
            let basis = FourierBasis::new(layout, -2.0, 3.0, 8, 17).unwrap();
            let coeffs = DVector::from_fn(basis.n_coeffs(), |_, _| rng.gen_range(-1.0..1.0));
            let grid_vals = basis.eval_on_grid(&coeffs).unwrap();
            let back = basis.project(grid_vals.as_slice()).unwrap();
            for i in 0..basis.n_coeffs() {
                assert_abs_diff_eq!(back[i], coeffs[i], epsilon = 1e-13);
            }
            // Off-grid agreement too: the function is inside the space.
            for _ in 0..20 {
                let x = rng.gen_range(-2.0..3.0);
                assert_abs_diff_eq!(
                    basis.eval_at(&back, x),
                    basis.eval_at(&coeffs, x),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn projection_of_smooth_function_interpolates() {
        // With m = 2N+1 the projection is the trigonometric interpolant:
        // residual at the nodes is round-off even though the function is not
        // band-limited.
        let basis = FourierBasis::new(Layout::WaveNls, -10.0, 10.0, 30, 61).unwrap();
        let g: Vec<f64> = basis.grid().iter().map(|&x| (-x * x / 4.0).exp()).collect();
        let coeffs = basis.project(&g).unwrap();
        let back = basis.eval_on_grid(&coeffs).unwrap();
        for (u, v) in g.iter().zip(back.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_aliasing_and_layout_mismatches() {
        let basis = FourierBasis::new(Layout::WaveNls, 0.0, 1.0, 8, 12).unwrap();
        let vals = vec![0.0; 13];
        assert!(matches!(
            basis.project(&vals),
            Err(Error::AliasingRisk { m: 12, needed: 17 })
        ));
        let ok = FourierBasis::new(Layout::WaveNls, 0.0, 1.0, 8, 17).unwrap();
        assert!(matches!(
            ok.project(&vals[..5]),
            Err(Error::LayoutMismatch { expected: 18, got: 5 })
        ));
        let bad = DVector::zeros(4);
        assert!(matches!(
            ok.eval_on_grid(&bad),
            Err(Error::LayoutMismatch { expected: 17, got: 4 })
        ));
    }

    #[test]
    fn trapezoid_integrates_constants_and_modes() {
        let basis = FourierBasis::new(Layout::WaveNls, -4.0, 6.0, 5, 11).unwrap();
        let ones = vec![1.0; 12];
        assert_abs_diff_eq!(basis.trapezoid(&ones), 10.0, epsilon = 1e-13);
        assert_abs_diff_eq!(basis.mean(&ones), 1.0, epsilon = 1e-14);
        // A pure oscillatory mode integrates to zero on the periodic grid.
        let col: Vec<f64> = (0..=11).map(|i| basis.grid_matrix()[(i, 3)]).collect();
        assert_abs_diff_eq!(basis.trapezoid(&col), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn skew_derivative_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(11);
        for layout in [Layout::WaveNls, Layout::Kdv] {
            let basis = FourierBasis::new(layout, -1.0, 4.0, 5, 11).unwrap();
            let v = DVector::from_fn(basis.n_coeffs(), |_, _| rng.gen_range(-1.0..1.0));
            // Coefficients of du/dx; the sign of the skew application flips
            // with the pair ordering.
            let deriv = match layout {
                Layout::WaveNls => -basis.apply_d(&v),
                Layout::Kdv => basis.apply_d(&v),
            };
            let h = 1e-5;
            for _ in 0..20 {
                let x = rng.gen_range(-1.0..4.0);
                let fd = (basis.eval_at(&v, x + h) - basis.eval_at(&v, x - h)) / (2.0 * h);
                assert_abs_diff_eq!(basis.eval_at(&deriv, x), fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn skew_operator_is_skew_and_squares_to_laplacian() {
        for layout in [Layout::WaveNls, Layout::Kdv] {
            let basis = FourierBasis::new(layout, 0.0, 3.0, 4, 9).unwrap();
            let n = basis.n_coeffs();
            let mut d = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                d.set_column(j, &basis.apply_d(&e));
            }
            let dt = d.transpose();
            for i in 0..n {
                for j in 0..n {
                    assert_abs_diff_eq!(d[(i, j)], -dt[(i, j)], epsilon = 1e-15);
                }
            }
            let dtd = &dt * &d;
            let lap = basis.laplacian_diag();
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { lap[i] } else { 0.0 };
                    assert_abs_diff_eq!(dtd[(i, j)], expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn pack_orders_position_before_momentum() {
        let q = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let p = DVector::from_vec(vec![-1.0, -2.0, -3.0]);
        let state = SpectralCoefficients::WaveNls { q, p }.pack();
        assert_eq!(state.as_slice(), &[1.0, 2.0, 3.0, -1.0, -2.0, -3.0]);
        let y = DVector::from_vec(vec![5.0, 6.0]);
        let state = SpectralCoefficients::Kdv { y, mean: 0.25 }.pack();
        assert_eq!(state.as_slice(), &[5.0, 6.0]);
    }
}
