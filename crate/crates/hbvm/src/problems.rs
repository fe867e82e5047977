//! The three benchmark problems: domain, final time, default resolution,
//! exact reference solutions, initial data and error measurement.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fourier::{FourierBasis, Layout, SpectralCoefficients};
use crate::system::HamiltonianSystem;
use crate::systems::{KdvSystem, NlseSystem, WaveSystem};

/// Soliton parameters of the KdV benchmark.
pub const KDV_EPS: f64 = 0.0013020833;
pub const KDV_SPEED: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    SineGordon,
    Nlse,
    Kdv,
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ProblemKind::SineGordon => "sine-gordon",
            ProblemKind::Nlse => "nlse",
            ProblemKind::Kdv => "kdv",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sine-gordon" => Ok(ProblemKind::SineGordon),
            "nlse" => Ok(ProblemKind::Nlse),
            "kdv" => Ok(ProblemKind::Kdv),
            other => Err(format!(
                "unknown problem '{other}' (expected sine-gordon, nlse or kdv)"
            )),
        }
    }
}

/// A fully specified benchmark setup.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkProblem {
    pub kind: ProblemKind,
    pub a: f64,
    pub b: f64,
    pub final_time: f64,
    pub default_n_modes: usize,
    pub default_m: usize,
}

impl BenchmarkProblem {
    /// Sine-Gordon equation `u_tt = u_xx - sin u` on [-50, 50] up to t = 100,
    /// started from rest at the origin of a kink-antikink pair.
    pub fn sine_gordon() -> Self {
        BenchmarkProblem {
            kind: ProblemKind::SineGordon,
            a: -50.0,
            b: 50.0,
            final_time: 100.0,
            default_n_modes: 300,
            default_m: 601,
        }
    }

    /// Focusing cubic Schroedinger equation on [-40, 80] up to t = 10 with a
    /// travelling bright soliton.
    pub fn nlse() -> Self {
        BenchmarkProblem {
            kind: ProblemKind::Nlse,
            a: -40.0,
            b: 80.0,
            final_time: 10.0,
            default_n_modes: 300,
            default_m: 601,
        }
    }

    /// KdV equation `u_t + eps u_xxx + u u_x = 0` on [-3, 5] up to t = 24
    /// (one full period of the cnoidal-limit soliton). The finer default
    /// grid keeps the cubic energy density alias-free: 3N <= m - 1.
    pub fn kdv() -> Self {
        BenchmarkProblem {
            kind: ProblemKind::Kdv,
            a: -3.0,
            b: 5.0,
            final_time: 24.0,
            default_n_modes: 300,
            default_m: 901,
        }
    }

    pub fn from_kind(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::SineGordon => Self::sine_gordon(),
            ProblemKind::Nlse => Self::nlse(),
            ProblemKind::Kdv => Self::kdv(),
        }
    }

    fn layout(&self) -> Layout {
        match self.kind {
            ProblemKind::Kdv => Layout::Kdv,
            _ => Layout::WaveNls,
        }
    }

    pub fn basis(&self, n_modes: usize, m: usize) -> Result<FourierBasis> {
        FourierBasis::new(self.layout(), self.a, self.b, n_modes, m)
    }

    /// Polynomial degree of the semi-discrete Hamiltonian, if finite.
    pub fn hamiltonian_degree(&self) -> Option<usize> {
        match self.kind {
            ProblemKind::SineGordon => None,
            ProblemKind::Nlse => Some(4),
            ProblemKind::Kdv => Some(3),
        }
    }

    /// Default stage-decay tolerance of the spectral-in-time method.
    pub fn default_spectral_tol(&self) -> f64 {
        match self.kind {
            ProblemKind::Nlse => 1e-14,
            _ => 1e-11,
        }
    }

    /// Build the semi-discrete system on the given basis. For KdV this fixes
    /// the conserved mean from the initial data.
    pub fn system(&self, basis: FourierBasis) -> ProblemSystem {
        match self.kind {
            ProblemKind::SineGordon => ProblemSystem::Wave(WaveSystem::sine_gordon(basis)),
            ProblemKind::Nlse => ProblemSystem::Nlse(NlseSystem::cubic(basis)),
            ProblemKind::Kdv => {
                let u0: Vec<f64> = basis.grid().iter().map(|&x| self.exact_kdv(x, 0.0)).collect();
                let mean = basis.mean(&u0);
                ProblemSystem::Kdv(KdvSystem::new(basis, -KDV_EPS, -1.0, mean))
            }
        }
    }

    /// Exact sine-Gordon solution and its time derivative.
    pub fn exact_sine_gordon(&self, x: f64, t: f64) -> (f64, f64) {
        let sech = 1.0 / x.cosh();
        let u = 4.0 * (t * sech).atan();
        let ut = 4.0 * sech / (1.0 + t * t * sech * sech);
        (u, ut)
    }

    /// Exact Schroedinger soliton, real and imaginary part.
    pub fn exact_nlse(&self, x: f64, t: f64) -> (f64, f64) {
        let env = 1.0 / (x - 4.0 * t).cosh();
        let phase = 2.0 * x - 3.0 * t;
        (env * phase.cos(), env * phase.sin())
    }

    /// Exact KdV soliton, periodized on the domain.
    pub fn exact_kdv(&self, x: f64, t: f64) -> f64 {
        let xi = periodic_wrap(x - KDV_SPEED * t, self.a, self.b);
        let w = (KDV_SPEED / (4.0 * KDV_EPS)).sqrt();
        let sech = 1.0 / (w * xi).cosh();
        3.0 * KDV_SPEED * sech * sech
    }

    /// Initial coefficients and the max-norm residual of the projection on
    /// the grid (the semi-discretization floor of the run).
    pub fn initial_state(&self, system: &ProblemSystem) -> Result<InitialState> {
        let basis = system.basis();
        let grid = basis.grid();
        match self.kind {
            ProblemKind::SineGordon => {
                // u(x, 0) = 0: positions start exactly at zero.
                let ut0: Vec<f64> = grid.iter().map(|&x| self.exact_sine_gordon(x, 0.0).1).collect();
                let q = DVector::zeros(basis.n_coeffs());
                let p = basis.project(&ut0)?;
                let back = basis.eval_on_grid(&p)?;
                let residual = max_abs_diff(back.as_slice(), &ut0);
                Ok(InitialState {
                    coefficients: SpectralCoefficients::WaveNls { q, p },
                    residual,
                })
            }
            ProblemKind::Nlse => {
                let u0: Vec<f64> = grid.iter().map(|&x| self.exact_nlse(x, 0.0).0).collect();
                let v0: Vec<f64> = grid.iter().map(|&x| self.exact_nlse(x, 0.0).1).collect();
                let q = basis.project(&u0)?;
                let p = basis.project(&v0)?;
                let ru = max_abs_diff(basis.eval_on_grid(&q)?.as_slice(), &u0);
                let rv = max_abs_diff(basis.eval_on_grid(&p)?.as_slice(), &v0);
                Ok(InitialState {
                    coefficients: SpectralCoefficients::WaveNls { q, p },
                    residual: ru.max(rv),
                })
            }
            ProblemKind::Kdv => {
                let u0: Vec<f64> = grid.iter().map(|&x| self.exact_kdv(x, 0.0)).collect();
                let mean = basis.mean(&u0);
                let y = basis.project(&u0)?;
                let mut back = basis.eval_on_grid(&y)?;
                back.add_scalar_mut(mean);
                let residual = max_abs_diff(back.as_slice(), &u0);
                Ok(InitialState {
                    coefficients: SpectralCoefficients::Kdv { y, mean },
                    residual,
                })
            }
        }
    }
}

/// Map xi into [a, b] by periodicity.
pub fn periodic_wrap(xi: f64, a: f64, b: f64) -> f64 {
    if xi >= a && xi <= b {
        xi
    } else if xi > b {
        a + (xi - a) % (b - a)
    } else {
        b - (b - xi) % (b - a)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Initial coefficients plus the projection residual on the grid.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub coefficients: SpectralCoefficients,
    pub residual: f64,
}

/// The semi-discrete system of a benchmark problem.
pub enum ProblemSystem {
    Wave(WaveSystem),
    Nlse(NlseSystem),
    Kdv(KdvSystem),
}

impl ProblemSystem {
    pub fn basis(&self) -> &FourierBasis {
        match self {
            ProblemSystem::Wave(s) => s.basis(),
            ProblemSystem::Nlse(s) => s.basis(),
            ProblemSystem::Kdv(s) => s.basis(),
        }
    }

    pub fn grad_hamiltonian(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            ProblemSystem::Wave(s) => s.grad_hamiltonian(y),
            ProblemSystem::Nlse(s) => s.grad_hamiltonian(y),
            ProblemSystem::Kdv(s) => s.grad_hamiltonian(y),
        }
    }
}

impl HamiltonianSystem for ProblemSystem {
    fn dim(&self) -> usize {
        match self {
            ProblemSystem::Wave(s) => s.dim(),
            ProblemSystem::Nlse(s) => s.dim(),
            ProblemSystem::Kdv(s) => s.dim(),
        }
    }

    fn rhs(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            ProblemSystem::Wave(s) => s.rhs(y, out),
            ProblemSystem::Nlse(s) => s.rhs(y, out),
            ProblemSystem::Kdv(s) => s.rhs(y, out),
        }
    }

    fn rhs_batch(&self, states: &nalgebra::DMatrix<f64>, out: &mut nalgebra::DMatrix<f64>) {
        match self {
            ProblemSystem::Wave(s) => s.rhs_batch(states, out),
            ProblemSystem::Nlse(s) => s.rhs_batch(states, out),
            ProblemSystem::Kdv(s) => s.rhs_batch(states, out),
        }
    }

    fn linear_part(&self) -> &crate::system::LinearPart {
        match self {
            ProblemSystem::Wave(s) => s.linear_part(),
            ProblemSystem::Nlse(s) => s.linear_part(),
            ProblemSystem::Kdv(s) => s.linear_part(),
        }
    }

    fn hamiltonian(&self, y: &DVector<f64>) -> f64 {
        match self {
            ProblemSystem::Wave(s) => s.hamiltonian(y),
            ProblemSystem::Nlse(s) => s.hamiltonian(y),
            ProblemSystem::Kdv(s) => s.hamiltonian(y),
        }
    }

    fn invariants(&self, y: &DVector<f64>) -> Vec<(&'static str, f64)> {
        match self {
            ProblemSystem::Wave(s) => s.invariants(y),
            ProblemSystem::Nlse(s) => s.invariants(y),
            ProblemSystem::Kdv(s) => s.invariants(y),
        }
    }
}

/// Worst-case errors over a trajectory.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Max over recorded steps of the max-norm grid error of the solution
    /// (both components for the Schroedinger problem).
    pub e_u: f64,
    /// Max absolute drift of the Hamiltonian.
    pub e_h: f64,
    /// Max drift of the mass invariant (Schroedinger only).
    pub e_1: Option<f64>,
    /// Max drift of the momentum invariant (Schroedinger only).
    pub e_2: Option<f64>,
}

/// Streaming error measurement: feed states as they are produced, without
/// storing the trajectory.
pub struct ErrorAccumulator<'p> {
    problem: &'p BenchmarkProblem,
    h0: f64,
    inv0: Vec<f64>,
    e_u: f64,
    e_h: f64,
    e_inv: Vec<f64>,
}

impl<'p> ErrorAccumulator<'p> {
    /// Start from the state at t = 0; reference energy and invariants are
    /// taken there.
    pub fn new(problem: &'p BenchmarkProblem, system: &ProblemSystem, y0: &DVector<f64>) -> Self {
        let h0 = system.hamiltonian(y0);
        let inv0: Vec<f64> = system.invariants(y0).iter().map(|(_, v)| *v).collect();
        let n_inv = inv0.len();
        let mut acc = ErrorAccumulator {
            problem,
            h0,
            inv0,
            e_u: 0.0,
            e_h: 0.0,
            e_inv: vec![0.0; n_inv],
        };
        acc.record(system, 0.0, y0);
        acc
    }

    /// Account for the state at time t.
    pub fn record(&mut self, system: &ProblemSystem, t: f64, y: &DVector<f64>) {
        let basis = system.basis();
        let grid = basis.grid();
        match system {
            ProblemSystem::Wave(_) => {
                let nc = basis.n_coeffs();
                let q = y.rows(0, nc).clone_owned();
                let u = basis.eval_on_grid(&q).expect("layout");
                for (i, &x) in grid.iter().enumerate() {
                    let (ue, _) = self.problem.exact_sine_gordon(x, t);
                    self.e_u = self.e_u.max((u[i] - ue).abs());
                }
            }
            ProblemSystem::Nlse(_) => {
                let nc = basis.n_coeffs();
                let q = y.rows(0, nc).clone_owned();
                let p = y.rows(nc, nc).clone_owned();
                let u = basis.eval_on_grid(&q).expect("layout");
                let v = basis.eval_on_grid(&p).expect("layout");
                for (i, &x) in grid.iter().enumerate() {
                    let (ue, ve) = self.problem.exact_nlse(x, t);
                    self.e_u = self.e_u.max((u[i] - ue).abs()).max((v[i] - ve).abs());
                }
            }
            ProblemSystem::Kdv(s) => {
                let u = s.u_grid(y);
                for (i, &x) in grid.iter().enumerate() {
                    let ue = self.problem.exact_kdv(x, t);
                    self.e_u = self.e_u.max((u[i] - ue).abs());
                }
            }
        }
        self.e_h = self.e_h.max((system.hamiltonian(y) - self.h0).abs());
        for (slot, ((_, v), v0)) in self
            .e_inv
            .iter_mut()
            .zip(system.invariants(y).iter().zip(&self.inv0))
        {
            *slot = slot.max((v - v0).abs());
        }
    }

    pub fn finish(self) -> ErrorReport {
        ErrorReport {
            e_u: self.e_u,
            e_h: self.e_h,
            e_1: self.e_inv.first().copied(),
            e_2: self.e_inv.get(1).copied(),
        }
    }
}

/// Batch form of the error measurement for a stored trajectory of
/// `(t, state)` pairs; the first entry must be the initial state at t = 0.
pub fn measure_errors(
    problem: &BenchmarkProblem,
    system: &ProblemSystem,
    trajectory: &[(f64, DVector<f64>)],
) -> ErrorReport {
    assert!(!trajectory.is_empty(), "empty trajectory");
    let mut acc = ErrorAccumulator::new(problem, system, &trajectory[0].1);
    for (t, y) in &trajectory[1..] {
        acc.record(system, *t, y);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn wrap_examples_and_idempotence() {
        assert_abs_diff_eq!(periodic_wrap(6.0, -3.0, 5.0), -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(periodic_wrap(-4.0, -3.0, 5.0), 4.0, epsilon = 1e-14);
        assert_eq!(periodic_wrap(1.25, -3.0, 5.0), 1.25);
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..1000 {
            let xi = rng.gen_range(-100.0..100.0);
            let w = periodic_wrap(xi, -3.0, 5.0);
            assert!((-3.0..=5.0).contains(&w), "wrap({xi}) = {w} out of range");
            assert_eq!(periodic_wrap(w, -3.0, 5.0), w);
        }
    }

    #[test]
    fn exact_solutions_at_time_zero() {
        let sg = BenchmarkProblem::sine_gordon();
        let (u, ut) = sg.exact_sine_gordon(0.7, 0.0);
        assert_eq!(u, 0.0);
        assert_abs_diff_eq!(ut, 4.0 / 0.7f64.cosh(), epsilon = 1e-15);

        let nls = BenchmarkProblem::nlse();
        let (u, v) = nls.exact_nlse(1.3, 0.0);
        let env = 1.0 / 1.3f64.cosh();
        assert_abs_diff_eq!(u, env * 2.6f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, env * 2.6f64.sin(), epsilon = 1e-15);

        let kdv = BenchmarkProblem::kdv();
        assert_abs_diff_eq!(kdv.exact_kdv(0.0, 0.0), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn kdv_solution_is_time_periodic() {
        // c T = 8 is exactly one domain length, so t = 24 reproduces t = 0.
        let kdv = BenchmarkProblem::kdv();
        for &x in &[-2.9, -1.0, 0.0, 0.4, 2.2, 4.9] {
            assert_abs_diff_eq!(kdv.exact_kdv(x, 24.0), kdv.exact_kdv(x, 0.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_solutions_satisfy_their_pdes() {
        // Fourth order finite differences in x and t at scattered points.
        let d = 1e-4;
        let d1 = |f: &dyn Fn(f64) -> f64, x: f64| {
            (-f(x + 2.0 * d) + 8.0 * f(x + d) - 8.0 * f(x - d) + f(x - 2.0 * d)) / (12.0 * d)
        };
        let d2 = |f: &dyn Fn(f64) -> f64, x: f64| {
            (-f(x + 2.0 * d) + 16.0 * f(x + d) - 30.0 * f(x) + 16.0 * f(x - d) - f(x - 2.0 * d))
                / (12.0 * d * d)
        };
        // Third derivative, fourth order, wide enough to beat the steep
        // 1/eps gradients of the KdV soliton.
        let d3 = |f: &dyn Fn(f64) -> f64, x: f64| {
            (-13.0 / 8.0 * (f(x + d) - f(x - d)) + (f(x + 2.0 * d) - f(x - 2.0 * d))
                - 1.0 / 8.0 * (f(x + 3.0 * d) - f(x - 3.0 * d)))
                / (d * d * d)
        };

        let mut rng = StdRng::seed_from_u64(5);
        let sg = BenchmarkProblem::sine_gordon();
        for _ in 0..12 {
            let x = rng.gen_range(-3.0..3.0);
            let t = rng.gen_range(0.5..4.0);
            let utt = d2(&|tau| sg.exact_sine_gordon(x, tau).0, t);
            let uxx = d2(&|xi| sg.exact_sine_gordon(xi, t).0, x);
            let u = sg.exact_sine_gordon(x, t).0;
            assert_abs_diff_eq!(utt - uxx + u.sin(), 0.0, epsilon = 1e-5);
        }

        let nls = BenchmarkProblem::nlse();
        for _ in 0..12 {
            let x = rng.gen_range(-2.0..2.0);
            let t = rng.gen_range(0.1..1.0);
            let (u, v) = nls.exact_nlse(x, t);
            let sigma = u * u + v * v;
            let ut = d1(&|tau| nls.exact_nlse(x, tau).0, t);
            let vt = d1(&|tau| nls.exact_nlse(x, tau).1, t);
            let uxx = d2(&|xi| nls.exact_nlse(xi, t).0, x);
            let vxx = d2(&|xi| nls.exact_nlse(xi, t).1, x);
            // i psi_t + psi_xx + 2 |psi|^2 psi = 0, split into real/imag.
            assert_abs_diff_eq!(-vt + uxx + 2.0 * sigma * u, 0.0, epsilon = 1e-5);
            assert_abs_diff_eq!(ut + vxx + 2.0 * sigma * v, 0.0, epsilon = 1e-5);
        }

        let kdv = BenchmarkProblem::kdv();
        for _ in 0..12 {
            let x = rng.gen_range(-1.0..1.0);
            let t = rng.gen_range(0.5..2.0);
            let u = kdv.exact_kdv(x, t);
            let ut = d1(&|tau| kdv.exact_kdv(x, tau), t);
            let ux = d1(&|xi| kdv.exact_kdv(xi, t), x);
            let uxxx = d3(&|xi| kdv.exact_kdv(xi, t), x);
            assert_abs_diff_eq!(ut + KDV_EPS * uxxx + u * ux, 0.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn initial_projection_sits_at_machine_level() {
        // At the default resolutions the projection residual on the grid is
        // the interpolation/truncation floor, far below any time-stepping
        // error of interest.
        for problem in [
            BenchmarkProblem::sine_gordon(),
            BenchmarkProblem::nlse(),
            BenchmarkProblem::kdv(),
        ] {
            let basis = problem
                .basis(problem.default_n_modes, problem.default_m)
                .unwrap();
            let system = problem.system(basis);
            let init = problem.initial_state(&system).unwrap();
            assert!(
                init.residual <= 1e-12,
                "{}: residual {:.3e}",
                problem.kind,
                init.residual
            );
        }
    }

    #[test]
    fn exact_trajectory_scores_projection_floor() {
        let problem = BenchmarkProblem::sine_gordon();
        let basis = problem.basis(40, 81).unwrap();
        let system = problem.system(basis);
        // Trajectory assembled from projections of the exact solution; e_u
        // should stay at the projection floor, not at time-stepping scale.
        let mut traj = Vec::new();
        for step in 0..=4 {
            let t = step as f64 * 0.5;
            let basis = system.basis();
            let ugrid: Vec<f64> = basis
                .grid()
                .iter()
                .map(|&x| problem.exact_sine_gordon(x, t).0)
                .collect();
            let utgrid: Vec<f64> = basis
                .grid()
                .iter()
                .map(|&x| problem.exact_sine_gordon(x, t).1)
                .collect();
            let q = basis.project(&ugrid).unwrap();
            let p = basis.project(&utgrid).unwrap();
            let y = SpectralCoefficients::WaveNls { q, p }.pack();
            traj.push((t, y));
        }
        let report = measure_errors(&problem, &system, &traj);
        assert!(report.e_u < 1e-10, "e_u = {:.3e}", report.e_u);
        assert!(report.e_1.is_none() && report.e_2.is_none());
    }

    #[test]
    fn energy_drift_ignores_constant_shifts() {
        // |H(y_n) - H(y_0)| is unchanged if H gains a constant, which guards
        // the measurement against normalization conventions.
        let problem = BenchmarkProblem::nlse();
        let basis = problem.basis(12, 25).unwrap();
        let system = problem.system(basis);
        let init = problem.initial_state(&system).unwrap();
        let y0 = init.coefficients.pack();
        let mut y1 = y0.clone();
        y1[3] += 1e-3;
        let traj = vec![(0.0, y0), (0.5, y1)];
        let r = measure_errors(&problem, &system, &traj);
        // Recompute with a shifted Hamiltonian by hand.
        let h0 = system.hamiltonian(&traj[0].1) + 5.0;
        let h1 = system.hamiltonian(&traj[1].1) + 5.0;
        assert_abs_diff_eq!(r.e_h, (h1 - h0).abs(), epsilon = 1e-15);
    }
}
