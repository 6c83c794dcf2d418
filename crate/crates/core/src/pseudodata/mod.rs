//! Pseudodata from the generating functions: true CFFs, true cross
//! sections, Gaussian noise, and generator refits.

mod generator;
mod lm;

pub use generator::{GeneratorParams, GeneratorSet};
pub use lm::{fit_generator, GeneratorFit, GeneratorFitOptions, GeneratorObservation};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{DataPoint, KinematicBin};
use crate::physics::{derive_kinematics, kelly_form_factors, CffSet, CrossSectionBasis, PhysicsConstants};
use crate::seeds::{derive_seed, purpose, rng_for};
use crate::{Error, Result};

const PSEUDO_NOISE: u64 = 9;
const CATALOG: u64 = 10;

/// A pseudodata bin with its generating truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoBin {
    /// Noisy central values; `sigma_f` is the template uncertainty.
    pub bin: KinematicBin,
    pub truth: CffSet,
    pub truth_f: Vec<f64>,
    pub noise_scale: f64,
    pub seed: u64,
}

/// True cross section on the template's phi-grid.
pub fn true_curve(template: &KinematicBin, truth: &CffSet, constants: &PhysicsConstants) -> Result<Vec<f64>> {
    let kin = derive_kinematics(template.k, template.q2, template.xb, template.t, constants, false)?;
    let ff = kelly_form_factors(kin.t, constants);
    Ok(CrossSectionBasis::new(&kin, &ff, constants, &template.phis())?.predict(truth))
}

/// F_i ~ Normal(truth_i, s sigma_i); s = 0 reproduces the truth exactly.
pub fn make_pseudobin_with_truth(
    template: &KinematicBin,
    truth: CffSet,
    noise_scale: f64,
    seed: u64,
    constants: &PhysicsConstants,
) -> Result<PseudoBin> {
    if !(noise_scale >= 0.0) || !noise_scale.is_finite() {
        return Err(Error::Config(format!("noise scale {noise_scale} must be >= 0")));
    }
    template.validate()?;
    let truth_f = true_curve(template, &truth, constants)?;
    let mut rng = rng_for(seed, &[PSEUDO_NOISE, template.set_id as u64]);
    let points = template
        .points
        .iter()
        .zip(&truth_f)
        .map(|(p, &f)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let f = if noise_scale == 0.0 { f } else { f + noise_scale * p.sigma_f * z };
            DataPoint { phi_deg: p.phi_deg, f, sigma_f: p.sigma_f }
        })
        .collect();
    Ok(PseudoBin { bin: KinematicBin { points, ..template.clone() }, truth, truth_f, noise_scale, seed })
}

pub fn make_pseudobin(
    template: &KinematicBin,
    generators: &GeneratorSet,
    noise_scale: f64,
    seed: u64,
    constants: &PhysicsConstants,
) -> Result<PseudoBin> {
    let truth = generators.eval(template.xb, template.t)?;
    make_pseudobin_with_truth(template, truth, noise_scale, seed, constants)
}

/// Standard 24-point azimuthal grid, 7.5 deg to 352.5 deg.
pub fn standard_phi_grid() -> Vec<f64> {
    (0..24).map(|i| 7.5 + 15.0 * i as f64).collect()
}

fn template_from_truth(
    set_id: u32,
    (k, q2, xb, t): (f64, f64, f64, f64),
    rel_sigma: &[f64],
    generators: &GeneratorSet,
    constants: &PhysicsConstants,
) -> Result<KinematicBin> {
    let phis = standard_phi_grid();
    let points: Vec<DataPoint> = phis.iter().map(|&phi_deg| DataPoint { phi_deg, f: 0.0, sigma_f: 1.0 }).collect();
    let mut bin = KinematicBin { set_id, k, q2, xb, t, points };
    let f = true_curve(&bin, &generators.eval(xb, t)?, constants)?;
    if f.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("non-positive true cross section in set {set_id}")));
    }
    for ((p, v), r) in bin.points.iter_mut().zip(f).zip(rel_sigma) {
        p.f = v;
        p.sigma_f = r * v;
    }
    Ok(bin)
}

/// A bin at k = 5.75, Q2 = 2.22, xB = 0.333, t = -0.16 with 5% uncertainties.
pub fn set_144_template(constants: &PhysicsConstants) -> Result<KinematicBin> {
    template_from_truth(144, (5.75, 2.22, 0.333, -0.16), &[0.05; 24], &GeneratorSet::BASIC, constants)
}

/// Synthetic template bins spanning the k = 5.75 GeV fixed-target range
/// (Q2 1.79-3.77, xB 0.244-0.475, -t 0.11-0.45), with central values from
/// the closure generators and relative uncertainties between 4% and 20%
/// per bin. Kinematics failing the twist-2 cuts or giving a non-positive
/// cross section are redrawn.
pub fn synthetic_templates(n: usize, seed: u64, constants: &PhysicsConstants) -> Result<Vec<KinematicBin>> {
    let mut rng = rng_for(seed, &[CATALOG]);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * (n + 1) {
            return Err(Error::Domain("could not draw valid template kinematics".into()));
        }
        let k = 5.75;
        let q2 = rng.random_range(1.79..3.77);
        let xb = rng.random_range(0.244..0.475);
        let t = -rng.random_range(0.11..0.45);
        let rel_bin = rng.random_range(0.04..0.20);
        let rel: Vec<f64> = (0..24).map(|_| rel_bin * rng.random_range(0.85..1.15)).collect();
        let Ok(kin) = derive_kinematics(k, q2, xb, t, constants, true) else { continue };
        if kin.y > 0.9 {
            continue;
        }
        let id = out.len() as u32 + 1;
        if let Ok(b) = template_from_truth(id, (k, q2, xb, t), &rel, &GeneratorSet::BASIC, constants) {
            out.push(b);
        }
    }
    Ok(out)
}

/// One pseudodata replica of the qualifier grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualifierReplicaSpec {
    pub set_id: u32,
    pub replica: usize,
    /// Level index per fit target into [`QUALIFIER_CFF_FACTORS`].
    pub levels: [u8; 4],
    pub truth: CffSet,
    pub noise_scale: f64,
    pub seed: u64,
}

/// Multiplicative variations applied to each true CFF.
pub const QUALIFIER_CFF_FACTORS: [f64; 5] = [0.6, 0.8, 1.0, 1.2, 1.4];
pub const QUALIFIER_NOISE_SCALES: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

/// 5 values per CFF x 4 noise scalings = 2500 replicas for one bin.
pub fn qualifier_grid(set_id: u32, base_truth: CffSet, seed: u64) -> Vec<QualifierReplicaSpec> {
    let base = base_truth.to_array();
    let n = QUALIFIER_CFF_FACTORS.len();
    let mut out = Vec::with_capacity(n.pow(4) * QUALIFIER_NOISE_SCALES.len());
    for (si, &s) in QUALIFIER_NOISE_SCALES.iter().enumerate() {
        for combo in 0..n.pow(4) {
            let levels = [combo % n, combo / n % n, combo / n.pow(2) % n, combo / n.pow(3) % n];
            let mut v = base;
            for (k, &l) in levels.iter().enumerate() {
                v[k] *= QUALIFIER_CFF_FACTORS[l];
            }
            let replica = si * n.pow(4) + combo;
            out.push(QualifierReplicaSpec {
                set_id,
                replica,
                levels: levels.map(|l| l as u8),
                truth: CffSet::from_array(v),
                noise_scale: s,
                seed: derive_seed(seed, &[purpose::REPLICA, set_id as u64, replica as u64]),
            });
        }
    }
    out
}
