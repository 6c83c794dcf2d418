use serde::{Deserialize, Serialize};

use super::PhysicsConstants;
use crate::{Error, Result};

/// Lower bound on Q^2 (GeV^2) for the leading-twist cuts.
pub const TWIST2_MIN_Q2: f64 = 1.5;
/// Upper bound on |t|/Q^2 for the leading-twist cuts.
pub const TWIST2_MAX_T_OVER_Q2: f64 = 0.25;

/// One kinematic setting together with every derived quantity the
/// harmonic coefficients need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    /// Beam energy (GeV).
    pub k: f64,
    /// Photon virtuality (GeV^2).
    pub q2: f64,
    /// Bjorken x.
    pub xb: f64,
    /// Momentum transfer squared (GeV^2, negative).
    pub t: f64,
    /// Lepton energy fraction.
    pub y: f64,
    /// epsilon^2 = 4 xB^2 M^2 / Q^2.
    pub eps2: f64,
    /// Skewness at leading twist, xB / (2 - xB).
    pub xi: f64,
    /// Kinematic lower limit of |t| (as a negative number).
    pub t_min: f64,
    /// Momentum-transfer factor K (BKM kinematical K).
    pub kfac: f64,
    /// K-tilde in the convention used by the twist-2 interference coefficients.
    pub ktilde: f64,
    /// Cross-section prefactor alpha^3 xB y^2 / (8 pi Q^4 sqrt(1+eps^2)), in GeV^-4.
    pub gamma: f64,
    /// Proton mass used for the derivation (GeV).
    pub mass: f64,
}

/// Skewness at leading twist.
pub fn skewness(xb: f64) -> f64 {
    xb / (2.0 - xb)
}

/// Derives the full set of kinematic variables from (k, Q^2, xB, t).
///
/// When `enforce_cuts` is set the leading-twist cuts Q^2 > 1.5 GeV^2 and
/// |t|/Q^2 <= 0.25 are applied as well.
pub fn derive_kinematics(
    k: f64,
    q2: f64,
    xb: f64,
    t: f64,
    constants: &PhysicsConstants,
    enforce_cuts: bool,
) -> Result<Kinematics> {
    if ![k, q2, xb, t].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("non-finite kinematic input".into()));
    }
    if k <= 0.0 {
        return Err(Error::Domain(format!("beam energy k = {k} must be positive")));
    }
    if q2 <= 0.0 {
        return Err(Error::Domain(format!("Q2 = {q2} must be positive")));
    }
    if !(xb > 0.0 && xb < 1.0) {
        return Err(Error::Domain(format!("xB = {xb} must lie in (0, 1)")));
    }
    if t >= 0.0 {
        return Err(Error::Domain(format!("t = {t} must be negative")));
    }
    if enforce_cuts {
        if q2 <= TWIST2_MIN_Q2 {
            return Err(Error::Domain(format!("Q2 = {q2} fails the twist-2 cut Q2 > {TWIST2_MIN_Q2}")));
        }
        if -t / q2 > TWIST2_MAX_T_OVER_Q2 {
            return Err(Error::Domain(format!(
                "|t|/Q2 = {} fails the twist-2 cut |t|/Q2 <= {TWIST2_MAX_T_OVER_Q2}",
                -t / q2
            )));
        }
    }

    let m = constants.proton_mass;
    let m2 = m * m;
    let eps2 = 4.0 * xb * xb * m2 / q2;
    let y = q2 / (2.0 * m * k * xb);
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!("derived y = {y} outside (0, 1)")));
    }
    let sq = (1.0 + eps2).sqrt();
    let lepton = 1.0 - y - y * y * eps2 / 4.0;
    if lepton <= 0.0 {
        return Err(Error::Domain(format!("1 - y - y^2 eps^2/4 = {lepton} is not positive")));
    }
    let t_min = -q2 * (2.0 * (1.0 - xb) * (1.0 - sq) + eps2) / (4.0 * xb * (1.0 - xb) + eps2);
    if t > t_min {
        return Err(Error::Domain(format!("t = {t} above kinematic limit t_min = {t_min}")));
    }
    let dt = t_min - t;
    let inner = (1.0 - xb) * sq + (t - t_min) * (eps2 + 4.0 * xb * (1.0 - xb)) / (4.0 * q2);
    let ktilde_true = (dt * inner).max(0.0).sqrt();
    let lepton_plus = 1.0 - y + y * y * eps2 / 4.0;
    let ktilde = ktilde_true * (lepton / lepton_plus).sqrt();
    let kfac = lepton_plus.sqrt() * ktilde / q2.sqrt();

    let alpha = constants.alpha_em;
    let gamma = alpha.powi(3) * xb * y * y / (8.0 * std::f64::consts::PI * q2 * q2 * sq);

    Ok(Kinematics { k, q2, xb, t, y, eps2, xi: skewness(xb), t_min, kfac, ktilde, gamma, mass: m })
}

impl Kinematics {
    /// The lepton-side combination 1 - y - y^2 eps^2 / 4.
    pub fn lepton_factor(&self) -> f64 {
        1.0 - self.y - self.y * self.y * self.eps2 / 4.0
    }

    /// xB / (2 - xB + xB t / Q^2), the prefactor of the vector and axial
    /// CFF combinations.
    pub fn va_prefactor(&self) -> f64 {
        self.xb / (2.0 - self.xb + self.xb * self.t / self.q2)
    }

    /// The J variable entering the lepton propagators.
    pub fn j_factor(&self) -> f64 {
        let (y, e2, t, q2, x) = (self.y, self.eps2, self.t, self.q2, self.xb);
        (1.0 - y - y * e2 / 2.0) * (1.0 + t / q2) - (1.0 - x) * (2.0 - y) * t / q2
    }
}
