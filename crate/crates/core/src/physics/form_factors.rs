use serde::{Deserialize, Serialize};

use super::PhysicsConstants;

/// Dirac and Pauli elastic form factors at one value of t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormFactors {
    pub f1: f64,
    pub f2: f64,
}

/// Rational-function coefficients of one Sachs form factor,
/// G(tau) = (1 + a1 tau) / (1 + b1 tau + b2 tau^2 + b3 tau^3).
#[derive(Debug, Clone, Copy)]
pub struct KellyCoefficients {
    pub a1: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl KellyCoefficients {
    pub const ELECTRIC: Self = Self { a1: -0.24, b1: 10.98, b2: 12.82, b3: 21.97 };
    /// Magnetic form factor normalised by the magnetic moment.
    pub const MAGNETIC: Self = Self { a1: 0.12, b1: 10.97, b2: 18.86, b3: 6.55 };

    pub fn eval(&self, tau: f64) -> f64 {
        (1.0 + self.a1 * tau) / (1.0 + tau * (self.b1 + tau * (self.b2 + tau * self.b3)))
    }
}

/// Proton F1, F2 from the Kelly parametrisation of G_E and G_M.
///
/// `t` must be non-positive; tau = -t / (4 M^2).
pub fn kelly_form_factors(t: f64, constants: &PhysicsConstants) -> FormFactors {
    let tau = -t / (4.0 * constants.mass_squared());
    let mu_p = 1.0 + constants.kappa_p;
    let ge = KellyCoefficients::ELECTRIC.eval(tau);
    let gm = mu_p * KellyCoefficients::MAGNETIC.eval(tau);
    FormFactors { f1: (ge + tau * gm) / (1.0 + tau), f2: (gm - ge) / (1.0 + tau) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation_at_zero() {
        let ff = kelly_form_factors(0.0, &PhysicsConstants::default());
        assert_eq!(ff.f1, 1.0);
        assert!((ff.f2 - 1.79285).abs() < 1e-14);
    }

    #[test]
    fn value_at_t_minus_0_3() {
        // Independent evaluation of the rational forms, written out longhand.
        let m = 0.938272f64;
        let tau = 0.3 / (4.0 * m * m);
        let ge = (1.0 - 0.24 * tau) / (1.0 + 10.98 * tau + 12.82 * tau * tau + 21.97 * tau.powi(3));
        let gm = 2.79285 * (1.0 + 0.12 * tau) / (1.0 + 10.97 * tau + 18.86 * tau * tau + 6.55 * tau.powi(3));
        let f1 = (ge + tau * gm) / (1.0 + tau);
        let f2 = (gm - ge) / (1.0 + tau);
        let ff = kelly_form_factors(-0.3, &PhysicsConstants::default());
        assert!((ff.f1 - f1).abs() < 1e-14);
        assert!((ff.f2 - f2).abs() < 1e-14);
        // frozen reference values
        assert!((ff.f1 - 0.548_751_813_642_034).abs() < 1e-12, "F1 = {}", ff.f1);
        assert!((ff.f2 - 0.810_632_478_177_081_1).abs() < 1e-12, "F2 = {}", ff.f2);
    }

    #[test]
    fn decreasing_in_abs_t() {
        let c = PhysicsConstants::default();
        let mut prev = kelly_form_factors(0.0, &c);
        for i in 1..50 {
            let ff = kelly_form_factors(-0.05 * i as f64, &c);
            assert!(ff.f1 < prev.f1 && ff.f2 < prev.f2);
            prev = ff;
        }
    }
}
