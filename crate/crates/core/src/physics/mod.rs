//! Unpolarized photon electroproduction cross section at twist-2.
//!
//! F_pred(phi) = BH(phi) + INT(phi; ReH, ReE, ReHt) + DVCS, with BH fixed
//! by the Kelly form factors and the DVCS^2 piece absorbed into one
//! phi-independent constant. Angles are Trento-convention degrees at the
//! API boundary.

pub mod coefficients;
mod constants;
mod cross_section;
mod form_factors;
mod kinematics;

pub use constants::PhysicsConstants;
pub use cross_section::{bh_term, forward_model, interference_term, lepton_propagators, CffSet, CrossSectionBasis};
pub use form_factors::{kelly_form_factors, FormFactors, KellyCoefficients};
pub use kinematics::{derive_kinematics, skewness, Kinematics, TWIST2_MAX_T_OVER_Q2, TWIST2_MIN_Q2};
