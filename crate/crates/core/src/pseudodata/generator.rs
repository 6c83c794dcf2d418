use serde::{Deserialize, Serialize};

use crate::physics::CffSet;
use crate::{Error, Result};

/// G(xB, t) = (a xB^2 + b xB) exp(c t^2 + d t + e) + f
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl GeneratorParams {
    pub const fn new(p: [f64; 6]) -> Self {
        Self { a: p[0], b: p[1], c: p[2], d: p[3], e: p[4], f: p[5] }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn eval(&self, xb: f64, t: f64) -> Result<f64> {
        if !xb.is_finite() || !t.is_finite() || !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("generator input".into()));
        }
        let expo = self.c * t * t + self.d * t + self.e;
        if expo > 700.0 {
            return Err(Error::Overflow(format!("exponent {expo} at xB = {xb}, t = {t}")));
        }
        Ok((self.a * xb * xb + self.b * xb) * expo.exp() + self.f)
    }
}

/// One generator per fit target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSet {
    pub re_h: GeneratorParams,
    pub re_e: GeneratorParams,
    pub re_ht: GeneratorParams,
    pub dvcs: GeneratorParams,
}

impl GeneratorSet {
    /// Closure-test generators.
    pub const BASIC: Self = Self {
        re_h: GeneratorParams::new([-4.41, 1.68, -9.14, -3.57, 1.54, -1.37]),
        re_e: GeneratorParams::new([144.56, 149.99, 0.32, -1.09, -148.49, -0.31]),
        re_ht: GeneratorParams::new([-1.86, 1.50, -0.29, -1.33, 0.46, -0.98]),
        dvcs: GeneratorParams::new([0.50, -0.41, 0.05, -0.25, 0.55, 0.166]),
    };

    /// Generators refitted to local extractions on real kinematics.
    pub const REALISTIC: Self = Self {
        re_h: GeneratorParams::new([-8.13, 1.82, 35.26, 25.37, 6.26, 3.20]),
        re_e: GeneratorParams::new([6.92, -5.64, 0.81, 0.98, 4.03, 49.71]),
        re_ht: GeneratorParams::new([-8.51, 1.72, 31.11, 22.49, 6.09, 4.77]),
        dvcs: GeneratorParams::new([0.45, -0.45, 4.40, 2.91, 0.13, 0.08]),
    };

    pub fn targets(&self) -> [GeneratorParams; 4] {
        [self.re_h, self.re_e, self.re_ht, self.dvcs]
    }

    pub fn from_targets(t: [GeneratorParams; 4]) -> Self {
        Self { re_h: t[0], re_e: t[1], re_ht: t[2], dvcs: t[3] }
    }

    pub fn eval(&self, xb: f64, t: f64) -> Result<CffSet> {
        Ok(CffSet::new(self.re_h.eval(xb, t)?, self.re_e.eval(xb, t)?, self.re_ht.eval(xb, t)?, self.dvcs.eval(xb, t)?))
    }

    /// Every parameter multiplied by an independent factor 1 + U(-spread, spread).
    pub fn perturbed(&self, spread: f64, rng: &mut impl rand::Rng) -> Self {
        let mut t = self.targets();
        for g in &mut t {
            let mut p = g.to_array();
            for v in &mut p {
                if spread > 0.0 {
                    *v *= 1.0 + rng.random_range(-spread..spread);
                }
            }
            *g = GeneratorParams::new(p);
        }
        Self::from_targets(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_when_a_b_vanish() {
        let g = GeneratorParams::new([0.0, 0.0, 1.0, 2.0, 3.0, 0.7]);
        assert_eq!(g.eval(0.4, -0.3).unwrap(), 0.7);
    }

    #[test]
    fn basic_dvcs_value() {
        let v = GeneratorSet::BASIC.dvcs.eval(0.3, -0.2).unwrap();
        let want = (0.5 * 0.09 - 0.41 * 0.3) * (0.05f64 * 0.04 + 0.05 + 0.55).exp() + 0.166;
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.0236).abs() < 5e-5, "{v}");
    }

    #[test]
    fn overflow_is_reported() {
        let g = GeneratorParams::new([1.0, 1.0, 0.0, 0.0, 800.0, 0.0]);
        assert!(matches!(g.eval(0.3, -0.2), Err(Error::Overflow(_))));
    }

    #[test]
    fn realistic_values_are_finite_on_data_range() {
        for i in 0..10 {
            for j in 0..10 {
                let xb = 0.244 + 0.023 * i as f64;
                let t = -0.11 - 0.034 * j as f64;
                assert!(GeneratorSet::REALISTIC.eval(xb, t).unwrap().is_finite());
            }
        }
    }
}
