use serde::{Deserialize, Serialize};

/// Physical constants shared by every cross-section evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConstants {
    /// Proton mass in GeV.
    pub proton_mass: f64,
    /// Fine-structure constant.
    pub alpha_em: f64,
    /// Proton anomalous magnetic moment.
    pub kappa_p: f64,
    /// Conversion from GeV^-2 to nb.
    pub gev2_to_nb: f64,
}

impl PhysicsConstants {
    pub const PROTON_MASS: f64 = 0.938272;
    pub const ALPHA_EM: f64 = 1.0 / 137.036;
    pub const KAPPA_P: f64 = 1.79285;
    /// (hbar c)^2 = 0.389379 GeV^2 mb.
    pub const GEV2_TO_NB: f64 = 0.389379e6;

    pub fn mass_squared(&self) -> f64 {
        self.proton_mass * self.proton_mass
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.proton_mass > 0.0) {
            return Err(crate::Error::Config("proton mass must be positive".into()));
        }
        if !(self.alpha_em > 0.0 && self.alpha_em < 0.01) {
            return Err(crate::Error::Config("alpha_em must lie in (0, 0.01)".into()));
        }
        if !(self.gev2_to_nb > 0.0) {
            return Err(crate::Error::Config("unit conversion must be positive".into()));
        }
        Ok(())
    }
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            proton_mass: Self::PROTON_MASS,
            alpha_em: Self::ALPHA_EM,
            kappa_p: Self::KAPPA_P,
            gev2_to_nb: Self::GEV2_TO_NB,
        }
    }
}
