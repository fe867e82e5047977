//! Hamiltonian Boundary Value Methods (HBVMs) as practical time integrators,
//! together with Fourier spectral semi-discretizations of three Hamiltonian
//! PDE benchmarks: the sine-Gordon equation, the nonlinear Schroedinger
//! equation, and the Korteweg-de Vries equation.
//!
//! An HBVM(k, s) advances an ODE `y' = J grad H(y)` with a k-stage implicit
//! Runge-Kutta scheme whose update lives in an s-dimensional polynomial
//! subspace. For `k = s` the method coincides with the s-stage Gauss
//! collocation scheme; for `k > s` it conserves polynomial Hamiltonians of
//! degree up to `2k/s` exactly and general ones to quadrature accuracy, at
//! essentially the cost of the s-stage method. Choosing s per step from the
//! decay of the expansion coefficients turns the integrator into a spectral
//! method in time.
//!
//! Crate layout:
//! - [`legendre`]: shifted orthonormal Legendre basis and Gauss rules,
//! - [`tableau`]: HBVM coefficient matrices,
//! - [`system`]: the Hamiltonian ODE interface,
//! - [`solver`]: the per-step nonlinear solve (fixed point or inexact Newton),
//! - [`adaptive`]: order selection at fixed stepsize,
//! - [`fourier`]: periodic trigonometric bases and quadrature on a grid,
//! - [`systems`]: semi-discrete wave, Schroedinger and KdV right-hand sides,
//! - [`problems`]: the three benchmark setups with exact solutions,
//! - [`harness`]: run/table/grid drivers behind the `hbvm` binary.

pub mod adaptive;
pub mod error;
pub mod fourier;
pub mod harness;
pub mod legendre;
pub mod problems;
pub mod solver;
pub mod system;
pub mod systems;
pub mod tableau;

pub use error::{Error, Result};
