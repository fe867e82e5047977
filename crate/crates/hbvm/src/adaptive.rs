//! Spectral-in-time stepping: fixed stepsize, per-step selection of the
//! number of stages s (and with it the quadrature size k).
//!
//! The first step runs at the initial s and its coefficient decay profile
//! calibrates the working order: s drops at once to the smallest count whose
//! trailing coefficients all sit below the tolerance. From then on the decay
//! indicator `rho` is checked after every accepted step; a sluggish decay
//! raises s by two for the next step and lifts the calibrated floor with it,
//! so the order never slides back down into a regime it already left. Steps
//! are never re-solved, so the control is free.
//!
//! The floor matters because the decay profile of a stiff semi-discretized
//! PDE is not monotone: past the resolved range the coefficient norms flatten
//! into a plateau fed by high-frequency modes of round-off amplitude. A
//! controller allowed to shrink whenever the last two columns look small ends
//! up oscillating against that plateau instead of settling.

use nalgebra::DVector;

use crate::error::Result;
use crate::solver::{rho_ratio, GammaSolution, Integrator, SolverConfig};
use crate::system::HamiltonianSystem;
use crate::tableau::{build_tableau, k_rule};

/// Policy knobs of the order controller.
#[derive(Debug, Clone, Copy)]
pub struct ControllerSettings {
    /// Target decay of the last stage coefficient relative to the largest.
    pub tol: f64,
    pub s_min: usize,
    pub s_max: usize,
    /// Polynomial degree of the Hamiltonian, if finite; feeds the k rule.
    pub hamiltonian_degree: Option<usize>,
}

impl ControllerSettings {
    pub fn new(tol: f64, hamiltonian_degree: Option<usize>) -> Self {
        ControllerSettings {
            tol,
            s_min: 2,
            s_max: 40,
            hamiltonian_degree,
        }
    }
}

/// What one adaptive step actually used and observed.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveStepRecord {
    pub k: usize,
    pub s: usize,
    pub rho: f64,
    pub iterations: usize,
}

/// Fixed-h integrator with per-step (k, s) selection.
pub struct AdaptiveIntegrator<'a, S: HamiltonianSystem + ?Sized> {
    integrator: Integrator<'a, S>,
    settings: ControllerSettings,
    s: usize,
    k: usize,
    /// Smallest s the controller may use; set by the first-step calibration
    /// and lifted on every later increase.
    floor_s: usize,
    calibrated: bool,
    s_max_exceeded: bool,
}

impl<'a, S: HamiltonianSystem + ?Sized> AdaptiveIntegrator<'a, S> {
    pub fn new(
        system: &'a S,
        s_init: usize,
        settings: ControllerSettings,
        config: SolverConfig,
    ) -> Result<Self> {
        let s = s_init.clamp(settings.s_min, settings.s_max);
        let k = k_rule(s, settings.hamiltonian_degree);
        let tableau = build_tableau(k, s)?;
        Ok(AdaptiveIntegrator {
            integrator: Integrator::new(system, tableau, config),
            settings,
            s,
            k,
            floor_s: settings.s_min,
            calibrated: false,
            s_max_exceeded: false,
        })
    }

    pub fn current_s(&self) -> usize {
        self.s
    }

    pub fn current_k(&self) -> usize {
        self.k
    }

    /// True once a step has asked for more than `s_max` stages. The run
    /// continues at the cap; the flag lets callers report that the requested
    /// accuracy was not certified.
    pub fn s_max_exceeded(&self) -> bool {
        self.s_max_exceeded
    }

    /// One step at the current (k, s), followed by the order update for the
    /// next step.
    pub fn step(&mut self, y0: &DVector<f64>, h: f64) -> Result<(DVector<f64>, AdaptiveStepRecord)> {
        let (y1, sol) = self.integrator.step(y0, h)?;
        let record = AdaptiveStepRecord {
            k: self.k,
            s: self.s,
            rho: sol.rho,
            iterations: sol.iterations,
        };
        self.update_order(&sol)?;
        Ok((y1, record))
    }

    fn update_order(&mut self, sol: &GammaSolution) -> Result<()> {
        if !self.calibrated {
            self.calibrated = true;
            let max = sol.column_norms.iter().cloned().fold(0.0f64, f64::max);
            let threshold = self.settings.tol * max;
            // Smallest order whose trailing coefficients all passed, on the
            // same parity lattice the +/-2 moves walk on.
            let mut target = match sol.column_norms.iter().rposition(|&v| v > threshold) {
                None => self.settings.s_min,
                Some(last_bad) => last_bad + 2,
            };
            target = target.clamp(self.settings.s_min, self.s);
            if (self.s - target) % 2 != 0 {
                target += 1;
            }
            self.floor_s = target;
            if target < self.s {
                return self.retarget(target);
            }
        }
        if sol.rho > self.settings.tol {
            if self.s + 2 <= self.settings.s_max {
                let target = self.s + 2;
                self.floor_s = target;
                self.retarget(target)?;
            } else {
                self.s_max_exceeded = true;
            }
        } else if self.s >= self.floor_s.max(self.settings.s_min) + 2 {
            // Would two fewer coefficients still have decayed enough?
            let shorter = &sol.column_norms[..self.s - 2];
            if rho_ratio(shorter) <= self.settings.tol {
                let target = self.s - 2;
                self.retarget(target)?;
            }
        }
        Ok(())
    }

    fn retarget(&mut self, new_s: usize) -> Result<()> {
        self.s = new_s;
        self.k = k_rule(new_s, self.settings.hamiltonian_degree);
        let tableau = build_tableau(self.k, self.s)?;
        self.integrator.set_tableau(tableau);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::LinearPart;
    use approx::assert_abs_diff_eq;

    /// Augmented polynomial system: tau' = 1, z' = tau^2. Stage coefficients
    /// of degree >= 3 vanish identically, so the controller must settle at
    /// s = 4 (two above the first index with nonzero content, since s moves
    /// in steps of two from an even start).
    struct PolyDrift {
        linear: LinearPart,
    }

    impl HamiltonianSystem for PolyDrift {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
            out[0] = 1.0;
            out[1] = y[0] * y[0];
        }
        fn linear_part(&self) -> &LinearPart {
            &self.linear
        }
        fn hamiltonian(&self, _y: &DVector<f64>) -> f64 {
            0.0
        }
    }

    #[test]
    fn settles_on_polynomial_content() {
        let sys = PolyDrift {
            linear: LinearPart::Zero,
        };
        let settings = ControllerSettings::new(1e-12, None);
        let mut ai = AdaptiveIntegrator::new(&sys, 12, settings, SolverConfig::default()).unwrap();
        let mut y = DVector::from_vec(vec![0.0, 0.0]);
        let mut last = 12;
        for _ in 0..12 {
            let (y1, rec) = ai.step(&y, 0.5).unwrap();
            y = y1;
            last = rec.s;
        }
        // gamma_2 is the highest nonzero coefficient (tau^2 content), so
        // shrinking stops at s = 4 and the exact solution is reproduced.
        assert_eq!(ai.current_s(), 4);
        assert_eq!(last, 4);
        let t = 6.0;
        assert_abs_diff_eq!(y[0], t, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], t * t * t / 3.0, epsilon = 1e-11);
        assert!(!ai.s_max_exceeded());
    }

    /// A signal the controller cannot represent: rho stays large, s climbs
    /// to the cap and the overflow flag sticks while stepping continues.
    struct Oscillatory {
        linear: LinearPart,
    }

    impl Oscillatory {
        fn new() -> Self {
            Oscillatory {
                linear: LinearPart::Dense(nalgebra::DMatrix::from_row_slice(
                    2,
                    2,
                    &[0.0, 1.0, -1.0, 0.0],
                )),
            }
        }
    }

    impl HamiltonianSystem for Oscillatory {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
            out[0] = y[1];
            out[1] = -y[0];
        }
        fn linear_part(&self) -> &LinearPart {
            &self.linear
        }
        fn hamiltonian(&self, y: &DVector<f64>) -> f64 {
            0.5 * (y[0] * y[0] + y[1] * y[1])
        }
    }

    #[test]
    fn saturates_at_s_max_and_keeps_going() {
        let sys = Oscillatory::new();
        // A huge stepsize over many periods cannot decay within 40 stages at
        // this tolerance.
        let settings = ControllerSettings {
            tol: 1e-30,
            s_min: 2,
            s_max: 8,
            hamiltonian_degree: None,
        };
        let mut ai = AdaptiveIntegrator::new(&sys, 2, settings, SolverConfig::default()).unwrap();
        let mut y = DVector::from_vec(vec![1.0, 0.0]);
        for _ in 0..8 {
            let (y1, _) = ai.step(&y, 3.0).unwrap();
            y = y1;
        }
        assert_eq!(ai.current_s(), 8);
        assert!(ai.s_max_exceeded());
        // Still a symplectic-ish step: energy stays bounded.
        assert!(sys.hamiltonian(&y).is_finite());
    }

    #[test]
    fn k_tracks_the_degree_rule() {
        let sys = PolyDrift {
            linear: LinearPart::Zero,
        };
        let settings = ControllerSettings::new(1e-12, Some(3));
        let ai = AdaptiveIntegrator::new(&sys, 10, settings, SolverConfig::default()).unwrap();
        assert_eq!(ai.current_k(), 15);
    }
}
