//! Reaction nonlinearities for the front equation.
//!
//! Two families are supported on the unit interval:
//!
//! * bistable: `f(u) = u (1 - u) (u - mu)` with threshold `mu` in (0, 1/2),
//!   negative on `(0, mu)`, positive on `(mu, 1)`;
//! * combustion: `f(u) = amplitude * (u - mu)^3 * (1 - u)` for `u > mu` and
//!   zero below the ignition cutoff. The cubic contact at `u = mu` keeps the
//!   nonlinearity twice continuously differentiable, which the linearized
//!   front and corrector solvers rely on.

use crate::error::Error;
use crate::Result;

/// Reaction term `f(u)` together with its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Bistable { mu: f64 },
    Combustion { mu: f64, amplitude: f64 },
}

impl Nonlinearity {
    pub fn bistable(mu: f64) -> Result<Self> {
        if !(0.0 < mu && mu < 0.5) {
            return Err(Error::Parameter(format!(
                "bistable threshold must lie in (0, 1/2), got {mu}"
            )));
        }
        Ok(Self::Bistable { mu })
    }

    pub fn combustion(mu: f64, amplitude: f64) -> Result<Self> {
        if !(0.0 < mu && mu < 1.0) {
            return Err(Error::Parameter(format!(
                "ignition cutoff must lie in (0, 1), got {mu}"
            )));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Parameter(format!(
                "combustion amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(Self::Combustion { mu, amplitude })
    }

    /// Reaction value `f(u)`.
    pub fn f(&self, u: f64) -> f64 {
        match *self {
            Self::Bistable { mu } => u * (1.0 - u) * (u - mu),
            Self::Combustion { mu, amplitude } => {
                if u <= mu {
                    0.0
                } else {
                    let s = u - mu;
                    amplitude * s * s * s * (1.0 - u)
                }
            }
        }
    }

    /// Derivative `f'(u)`.
    pub fn f_prime(&self, u: f64) -> f64 {
        match *self {
            Self::Bistable { mu } => -3.0 * u * u + 2.0 * (1.0 + mu) * u - mu,
            Self::Combustion { mu, amplitude } => {
                if u <= mu {
                    0.0
                } else {
                    let s = u - mu;
                    amplitude * s * s * (3.0 + mu - 4.0 * u)
                }
            }
        }
    }

    /// Threshold parameter (bistable root, resp. ignition cutoff).
    pub fn mu(&self) -> f64 {
        match *self {
            Self::Bistable { mu } | Self::Combustion { mu, .. } => mu,
        }
    }

    /// Closed-form front speed where one exists (bistable only).
    pub fn analytic_speed(&self) -> Option<f64> {
        match *self {
            Self::Bistable { mu } => Some(std::f64::consts::SQRT_2 * (0.5 - mu)),
            Self::Combustion { .. } => None,
        }
    }

    /// Upper bound for `|f'|` on `[0, 1]`, used in explicit time-step control.
    /// A dense scan is exact enough for a stability constant.
    pub fn lipschitz_bound(&self) -> f64 {
        let n = 2000;
        (0..=n)
            .map(|i| self.f_prime(i as f64 / n as f64).abs())
            .fold(0.0f64, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bistable_midpoint_value() {
        let f = Nonlinearity::bistable(0.25).unwrap();
        assert_eq!(f.f(0.5), 0.0625, "f(1/2) = (1/2)(1/2)(1/4)");
    }

    #[test]
    fn bistable_slopes_at_stable_states() {
        let f = Nonlinearity::bistable(0.25).unwrap();
        assert!((f.f_prime(0.0) + 0.25).abs() < 1e-15, "slope at u=0 is -mu");
        assert!((f.f_prime(1.0) + 0.75).abs() < 1e-15, "slope at u=1 is -(1-mu)");
    }

    #[test]
    fn bistable_analytic_speed_values() {
        let c = |mu: f64| Nonlinearity::bistable(mu).unwrap().analytic_speed().unwrap();
        assert!((c(0.25) - 0.3535533906).abs() < 1e-9);
        assert!((c(0.4) - 0.1414213562).abs() < 1e-9);
    }

    #[test]
    fn combustion_vanishes_below_cutoff_with_c2_contact() {
        let f = Nonlinearity::combustion(0.3, 1.0).unwrap();
        for u in [0.0, 0.1, 0.2, 0.3] {
            assert_eq!(f.f(u), 0.0);
            assert_eq!(f.f_prime(u), 0.0);
        }
        // Approach from the right: value ~ eps^3, slope ~ eps^2, curvature ~ eps.
        for k in 1..6 {
            let eps = 10f64.powi(-k);
            assert!(f.f(0.3 + eps) < 4.0 * eps.powi(3));
            assert!(f.f_prime(0.3 + eps) < 4.0 * eps.powi(2));
        }
    }

    #[test]
    fn parameter_validation_rejects_out_of_range() {
        assert!(Nonlinearity::bistable(0.5).is_err());
        assert!(Nonlinearity::bistable(0.0).is_err());
        assert!(Nonlinearity::combustion(1.0, 1.0).is_err());
        assert!(Nonlinearity::combustion(0.3, 0.0).is_err());
    }

    #[test]
    fn lipschitz_bound_dominates_slope_samples() {
        for nl in [
            Nonlinearity::bistable(0.25).unwrap(),
            Nonlinearity::combustion(0.3, 1.0).unwrap(),
        ] {
            let lip = nl.lipschitz_bound();
            for i in 0..=100 {
                assert!(nl.f_prime(i as f64 / 100.0).abs() <= lip + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn roots_pin_both_equilibria(mu in 0.05f64..0.45) {
            let f = Nonlinearity::bistable(mu).unwrap();
            prop_assert!(f.f(0.0).abs() < 1e-15);
            prop_assert!(f.f(1.0).abs() < 1e-15);
            prop_assert!(f.f(mu).abs() < 1e-15);
        }

        #[test]
        fn bistable_sign_structure(mu in 0.05f64..0.45, t in 0.01f64..0.99) {
            let f = Nonlinearity::bistable(mu).unwrap();
            // Sample strictly inside each sign region.
            let below = mu * t;
            let above = mu + (1.0 - mu) * t;
            if below > 1e-9 {
                prop_assert!(f.f(below) < 0.0, "f must be negative on (0, mu)");
            }
            if above < 1.0 - 1e-9 && above > mu + 1e-9 {
                prop_assert!(f.f(above) > 0.0, "f must be positive on (mu, 1)");
            }
        }

        #[test]
        fn derivative_matches_finite_difference(
            mu in 0.05f64..0.45,
            u in 0.0f64..1.0,
            combustion in proptest::bool::ANY,
        ) {
            let nl = if combustion {
                Nonlinearity::combustion(mu + 0.2, 1.0).unwrap()
            } else {
                Nonlinearity::bistable(mu).unwrap()
            };
            let h = 1e-6;
            let fd = (nl.f(u + h) - nl.f(u - h)) / (2.0 * h);
            // The combustion cutoff breaks the stencil only in an O(h) collar.
            if !combustion || (u - nl.mu()).abs() > 1e-5 {
                prop_assert!((fd - nl.f_prime(u)).abs() < 1e-8,
                    "analytic slope {} vs finite difference {}", nl.f_prime(u), fd);
            }
        }
    }
}
