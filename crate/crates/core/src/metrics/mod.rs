//! Error taxonomy, curve-proximity metrics and the quantum qualifier.

mod qualifier;

pub use qualifier::{nonlinearity, qualifier, qualifier_calibration, Calibration, QualifierFeatures, XI_HAT_COEFFS};

use serde::{Deserialize, Serialize};

use crate::data::KinematicBin;
use crate::models::ModelClass;
use crate::physics::{derive_kinematics, kelly_form_factors, CffSet, CrossSectionBasis, PhysicsConstants};
use crate::pseudodata::{make_pseudobin, GeneratorSet};
use crate::seeds::{derive_seed, purpose, rng_for};
use crate::training::{fit_local, fit_replicas, BinProblem, FitConfig, ReplicaEnsemble, ResampleMode, SeedPolicy};
use crate::{Error, Result};

pub const PHI_MIN_DEG: f64 = 7.5;
pub const PHI_MAX_DEG: f64 = 352.5;
pub const SIMPSON_INTERVALS: usize = 2048;

fn mean4(c: &[CffSet]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for x in c {
        for (mk, v) in m.iter_mut().zip(x.to_array()) {
            *mk += v;
        }
    }
    m.map(|v| v / c.len() as f64)
}

/// |ensemble mean - truth| per target.
pub fn accuracy(ensemble: &ReplicaEnsemble, truth: Option<&CffSet>) -> Result<[f64; 4]> {
    let truth = truth.ok_or(Error::MissingTruth(ensemble.set_id))?;
    let c = ensemble.included();
    if c.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let m = mean4(&c);
    let t = truth.to_array();
    Ok([0, 1, 2, 3].map(|k| (m[k] - t[k]).abs()))
}

/// Population standard deviation (divide by N) per target. Values are
/// shifted by the first replica first, so identical replicas give exactly 0.
pub fn precision_of(cffs: &[CffSet]) -> Result<[f64; 4]> {
    if cffs.len() < 2 {
        return Err(Error::InsufficientReplicas { needed: 2, have: cffs.len() });
    }
    let x0 = cffs[0].to_array();
    let shifted: Vec<CffSet> =
        cffs.iter().map(|c| CffSet::from_array([0, 1, 2, 3].map(|k| c.to_array()[k] - x0[k]))).collect();
    let m = mean4(&shifted);
    let mut v = [0.0; 4];
    for c in &shifted {
        for (k, x) in c.to_array().iter().enumerate() {
            v[k] += (x - m[k]).powi(2);
        }
    }
    Ok(v.map(|s| (s / cffs.len() as f64).sqrt()))
}

pub fn precision(ensemble: &ReplicaEnsemble) -> Result<[f64; 4]> {
    precision_of(&ensemble.included())
}

/// Spread of fits to identical copies of the data.
pub fn algorithmic_error(
    class: ModelClass,
    problem: &BinProblem,
    n: usize,
    seed_policy: SeedPolicy,
    config: &FitConfig,
) -> Result<[f64; 4]> {
    precision(&fit_replicas(class, problem, n, ResampleMode::Identical, seed_policy, config)?)
}

/// Spread of (extracted - truth) when the generating parameters are
/// perturbed by a relative uniform `spread`; one noiseless fit per draw.
pub fn methodological_error(
    class: ModelClass,
    template: &KinematicBin,
    generators: &GeneratorSet,
    spread: f64,
    n_draws: usize,
    config: &FitConfig,
    constants: &PhysicsConstants,
) -> Result<[f64; 4]> {
    let mut residuals = Vec::with_capacity(n_draws);
    for d in 0..n_draws {
        let mut rng = rng_for(config.seed, &[purpose::SPREAD, template.set_id as u64, d as u64]);
        let g = generators.perturbed(spread, &mut rng);
        let pb = make_pseudobin(template, &g, 0.0, config.seed, constants)?;
        let problem = BinProblem::new(&pb.bin, constants)?;
        let cfg = FitConfig { seed: derive_seed(config.seed, &[purpose::SPREAD, d as u64]), ..config.clone() };
        let fit = fit_local(class, &problem, &cfg)?;
        let r = fit.cffs.to_array();
        let t = pb.truth.to_array();
        residuals.push(CffSet::from_array([0, 1, 2, 3].map(|k| r[k] - t[k])));
    }
    precision_of(&residuals)
}

/// sum over targets of (1/N_bins) sum_b (mean_b - truth_b)^2 / sigma_b^2
pub fn m_chi2(means: &[CffSet], truths: &[CffSet], sigmas: &[CffSet]) -> Result<f64> {
    if means.len() != truths.len() || means.len() != sigmas.len() {
        return Err(Error::Shape("means, truths and sigmas differ in length".into()));
    }
    if means.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut total = 0.0;
    for ((m, t), s) in means.iter().zip(truths).zip(sigmas) {
        let (m, t, s) = (m.to_array(), t.to_array(), s.to_array());
        for k in 0..4 {
            if s[k] == 0.0 {
                return Err(Error::ZeroSigma(format!("{} in m_chi2", CffSet::NAMES[k])));
            }
            total += ((m[k] - t[k]) / s[k]).powi(2);
        }
    }
    Ok(total / means.len() as f64)
}

/// Composite Simpson rule with an even number of intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Integral of |fit - truth| over phi in degrees.
pub fn m_dvcs(fit: impl Fn(f64) -> f64, truth: impl Fn(f64) -> f64, phi_range: (f64, f64)) -> f64 {
    simpson(|p| (fit(p) - truth(p)).abs(), phi_range.0, phi_range.1, SIMPSON_INTERVALS)
}

/// Forward-model basis on the Simpson nodes of one bin, so M_DVCS between
/// many CFF sets costs one pass over the nodes each.
#[derive(Debug, Clone)]
pub struct MdvcsGrid {
    basis: CrossSectionBasis,
    h: f64,
}

impl MdvcsGrid {
    pub fn new(bin: &KinematicBin, constants: &PhysicsConstants) -> Result<Self> {
        let kin = derive_kinematics(bin.k, bin.q2, bin.xb, bin.t, constants, false)?;
        let ff = kelly_form_factors(kin.t, constants);
        let n = SIMPSON_INTERVALS;
        let h = (PHI_MAX_DEG - PHI_MIN_DEG) / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| PHI_MIN_DEG + i as f64 * h).collect();
        Ok(Self { basis: CrossSectionBasis::new(&kin, &ff, constants, &nodes)?, h })
    }

    /// Predicted cross section on the nodes.
    pub fn curve(&self, cffs: &CffSet) -> Vec<f64> {
        self.basis.predict(cffs)
    }

    pub fn between(&self, fit: &CffSet, truth: &CffSet) -> f64 {
        let n = self.basis.len() - 1;
        let mut s = 0.0;
        for i in 0..=n {
            let d = (self.basis.predict_at(i, fit) - self.basis.predict_at(i, truth)).abs();
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * d;
        }
        s * self.h / 3.0
    }
}

/// M_DVCS between the forward-model curves of two CFF sets at one bin.
pub fn m_dvcs_cffs(bin: &KinematicBin, fit: &CffSet, truth: &CffSet, constants: &PhysicsConstants) -> Result<f64> {
    Ok(MdvcsGrid::new(bin, constants)?.between(fit, truth))
}

/// Xi = M_cdnn / M_qdnn - 1; positive when the quantum model is closer.
pub fn xi_outperformance(m_cdnn: f64, m_qdnn: f64) -> Result<f64> {
    if m_qdnn == 0.0 {
        return Err(Error::DivisionByZero("quantum-model M_DVCS is zero".into()));
    }
    Ok(m_cdnn / m_qdnn - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvgScaledError {
    pub value: f64,
    pub n_used: usize,
    pub n_excluded: usize,
}

/// Mean of s sigma_i / F_i over all points of all bins (replicas); points
/// with F <= 0 are skipped and counted.
pub fn avg_scaled_error(bins: &[KinematicBin], s: f64) -> AvgScaledError {
    let mut acc = 0.0;
    let mut n_used = 0;
    let mut n_excluded = 0;
    for b in bins {
        for p in &b.points {
            if p.f > 0.0 {
                acc += s * p.sigma_f / p.f;
                n_used += 1;
            } else {
                n_excluded += 1;
            }
        }
    }
    let value = if n_used == 0 { 0.0 } else { acc / n_used as f64 };
    AvgScaledError { value, n_used, n_excluded }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub set_id: u32,
    pub model_class: ModelClass,
    pub accuracy: Option<[f64; 4]>,
    pub precision: [f64; 4],
    pub algorithmic: Option<[f64; 4]>,
    pub methodological: Option<[f64; 4]>,
    pub n_excluded: usize,
}
