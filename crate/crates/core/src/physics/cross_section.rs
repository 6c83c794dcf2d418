use serde::{Deserialize, Serialize};

use super::coefficients::{bh_coefficients, interference_coefficients};
use super::{FormFactors, Kinematics, PhysicsConstants};
use crate::{Error, Result};

/// The four fit targets at one kinematic bin.
///
/// `dvcs` is the phi-independent DVCS^2 contribution, defined after the
/// cross-section prefactor, so it carries the same units as the cross
/// section itself (nb/GeV^4).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CffSet {
    pub re_h: f64,
    pub re_e: f64,
    pub re_ht: f64,
    pub dvcs: f64,
}

impl CffSet {
    pub const NAMES: [&'static str; 4] = ["ReH", "ReE", "ReHt", "DVCS"];

    pub fn new(re_h: f64, re_e: f64, re_ht: f64, dvcs: f64) -> Self {
        Self { re_h, re_e, re_ht, dvcs }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.re_h, self.re_e, self.re_ht, self.dvcs]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        match s {
            [a, b, c, d] => Ok(Self::new(*a, *b, *c, *d)),
            _ => Err(Error::Shape(format!("expected 4 CFF values, got {}", s.len()))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Azimuthal angle in the BKM frame (radians) from a Trento angle in degrees.
fn bkm_phi(phi_deg: f64) -> f64 {
    std::f64::consts::PI - phi_deg.to_radians()
}

/// Lepton propagators P1(phi), P2(phi) for a Trento angle in degrees.
pub fn lepton_propagators(kin: &Kinematics, phi_deg: f64) -> (f64, f64) {
    let c = bkm_phi(phi_deg).cos();
    let a = (kin.j_factor() + 2.0 * kin.kfac * c) / (kin.y * (1.0 + kin.eps2));
    (-a, 1.0 + kin.t / kin.q2 + a)
}

fn checked_propagators(kin: &Kinematics, phi_deg: f64) -> Result<f64> {
    let (p1, p2) = lepton_propagators(kin, phi_deg);
    let prod = p1 * p2;
    if !(prod.abs() > 1e-12) || !prod.is_finite() {
        return Err(Error::Singularity { phi_deg });
    }
    Ok(prod)
}

/// Overall factor converting a squared amplitude (divided by e^6) into
/// nb/GeV^4: the cross-section prefactor times the unit conversion.
fn unit_prefactor(kin: &Kinematics, constants: &PhysicsConstants) -> f64 {
    kin.gamma * constants.gev2_to_nb
}

/// Bethe-Heitler contribution to the unpolarized cross section (nb/GeV^4).
pub fn bh_term(kin: &Kinematics, ff: &FormFactors, constants: &PhysicsConstants, phi_deg: f64) -> Result<f64> {
    let pp = checked_propagators(kin, phi_deg)?;
    let c = bh_coefficients(kin, ff).c;
    let p = bkm_phi(phi_deg);
    let series = c[0] + c[1] * p.cos() + c[2] * (2.0 * p).cos();
    let amp2 = series / (kin.xb * kin.xb * kin.y * kin.y * (1.0 + kin.eps2).powi(2) * kin.t * pp);
    Ok(unit_prefactor(kin, constants) * amp2)
}

/// Harmonic sums entering the interference for each of the three CFF
/// combinations at one angle: (sum C_n cos, sum C^V_n cos, sum C^A_n cos).
fn interference_harmonics(kin: &Kinematics, phi_deg: f64) -> [f64; 3] {
    let ic = interference_coefficients(kin);
    let p = bkm_phi(phi_deg);
    let mut out = [0.0; 3];
    for n in 0..4 {
        let c = (n as f64 * p).cos();
        out[0] += ic.pp[n] * c;
        out[1] += ic.vector[n] * c;
        out[2] += ic.axial[n] * c;
    }
    out
}

/// Interference contributions per unit ReH, ReE and ReHt (nb/GeV^4).
fn interference_basis(
    kin: &Kinematics,
    ff: &FormFactors,
    constants: &PhysicsConstants,
    phi_deg: f64,
) -> Result<[f64; 3]> {
    let pp = checked_propagators(kin, phi_deg)?;
    let [s, sv, sa] = interference_harmonics(kin, phi_deg);
    let FormFactors { f1, f2 } = *ff;
    let m2 = kin.mass * kin.mass;
    let kappa = kin.va_prefactor();
    // C_I   = F1 H + xi (F1+F2) Ht - t/(4M^2) F2 E
    // C_I^V = kappa (F1+F2)(H + E)
    // C_I^A = kappa (F1+F2) Ht
    let d_h = s * f1 + sv * kappa * (f1 + f2);
    let d_e = -s * kin.t / (4.0 * m2) * f2 + sv * kappa * (f1 + f2);
    let d_ht = s * kin.xi * (f1 + f2) + sa * kappa * (f1 + f2);
    let scale = unit_prefactor(kin, constants) / (kin.xb * kin.y.powi(3) * kin.t * pp);
    Ok([scale * d_h, scale * d_e, scale * d_ht])
}

/// BH-DVCS interference contribution (nb/GeV^4); linear in ReH, ReE, ReHt.
pub fn interference_term(
    kin: &Kinematics,
    ff: &FormFactors,
    constants: &PhysicsConstants,
    cffs: &CffSet,
    phi_deg: f64,
) -> Result<f64> {
    let b = interference_basis(kin, ff, constants, phi_deg)?;
    Ok(b[0] * cffs.re_h + b[1] * cffs.re_e + b[2] * cffs.re_ht)
}

/// Full prediction F_pred = BH + interference + DVCS constant (nb/GeV^4).
pub fn forward_model(
    kin: &Kinematics,
    ff: &FormFactors,
    constants: &PhysicsConstants,
    cffs: &CffSet,
    phi_deg: f64,
) -> Result<f64> {
    Ok(bh_term(kin, ff, constants, phi_deg)? + interference_term(kin, ff, constants, cffs, phi_deg)? + cffs.dvcs)
}

/// Precomputed affine map CFFSet -> F_pred on a fixed phi grid.
///
/// Because the prediction is affine in the CFFs at fixed kinematics, a
/// bin's forward model reduces to one BH offset and three basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionBasis {
    pub phis_deg: Vec<f64>,
    pub bh: Vec<f64>,
    /// Per-point derivative with respect to (ReH, ReE, ReHt).
    pub linear: Vec<[f64; 3]>,
}

impl CrossSectionBasis {
    pub fn new(kin: &Kinematics, ff: &FormFactors, constants: &PhysicsConstants, phis_deg: &[f64]) -> Result<Self> {
        let mut bh = Vec::with_capacity(phis_deg.len());
        let mut linear = Vec::with_capacity(phis_deg.len());
        for &phi in phis_deg {
            bh.push(bh_term(kin, ff, constants, phi)?);
            linear.push(interference_basis(kin, ff, constants, phi)?);
        }
        Ok(Self { phis_deg: phis_deg.to_vec(), bh, linear })
    }

    pub fn len(&self) -> usize {
        self.bh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bh.is_empty()
    }

    pub fn predict_at(&self, i: usize, cffs: &CffSet) -> f64 {
        let l = &self.linear[i];
        self.bh[i] + l[0] * cffs.re_h + l[1] * cffs.re_e + l[2] * cffs.re_ht + cffs.dvcs
    }

    pub fn predict(&self, cffs: &CffSet) -> Vec<f64> {
        (0..self.len()).map(|i| self.predict_at(i, cffs)).collect()
    }

    /// Gradient of F_pred at point i with respect to the four targets.
    pub fn gradient_at(&self, i: usize) -> [f64; 4] {
        let l = &self.linear[i];
        [l[0], l[1], l[2], 1.0]
    }
}
