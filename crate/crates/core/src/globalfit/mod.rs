//! Bootstrap ensemble of classical networks mapping kinematics to CFFs,
//! trained on per-bin local extractions.

mod hull;
mod net;

pub use hull::{in_convex_hull, nnls};
pub use net::{
    init_net, net_loss_grad, net_predict, GlobalNetSpec, HiddenLayer, NetState, DEFAULT_ACTIVATIONS, DEFAULT_BATCH_NORM,
};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optim::{Adam, AdamConfig};
use crate::physics::{skewness, CffSet};
use crate::seeds::{derive_seed, purpose, rng_for};
use crate::{Error, Result};

/// Per-bin local result used as a global-fit training target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalExtraction {
    pub set_id: u32,
    pub k: f64,
    pub q2: f64,
    pub xb: f64,
    pub t: f64,
    pub mean: CffSet,
    pub sigma: CffSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalFitConfig {
    pub net: GlobalNetSpec,
    pub n_replicas: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    /// Resample bins with replacement for each replica.
    pub bootstrap: bool,
    /// Add Normal(0, sigma) to each replica's CFF targets.
    pub jitter: bool,
    pub seed: u64,
}

impl Default for GlobalFitConfig {
    fn default() -> Self {
        Self {
            net: GlobalNetSpec::default(),
            n_replicas: 1000,
            epochs: 500,
            learning_rate: 3e-3,
            adam: AdamConfig::default(),
            bootstrap: true,
            jitter: true,
            seed: 0,
        }
    }
}

impl GlobalFitConfig {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.net.n_inputs != N_FEATURES {
            return Err(Error::Config(format!("global net takes {N_FEATURES} inputs, not {}", self.net.n_inputs)));
        }
        if self.n_replicas < 2 {
            return Err(Error::Config("need at least 2 global replicas".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

pub const N_FEATURES: usize = 4;

/// (xB, t, Q2, xi)
pub fn features(xb: f64, t: f64, q2: f64) -> [f64; N_FEATURES] {
    [xb, t, q2, skewness(xb)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalReplica {
    pub replica: usize,
    pub seed: u64,
    pub bootstrap: Vec<usize>,
    /// One network per fit target.
    pub nets: Vec<NetState>,
    pub final_loss: [f64; 4],
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalEnsemble {
    pub spec: GlobalNetSpec,
    pub feature_mean: [f64; N_FEATURES],
    pub feature_std: [f64; N_FEATURES],
    pub target_mean: [f64; 4],
    pub target_std: [f64; 4],
    /// Training kinematics (xB, t, Q2) used for the extrapolation flag.
    pub support: Vec<[f64; 3]>,
    pub replicas: Vec<GlobalReplica>,
}

fn mean_std(cols: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = cols.clone().count() as f64;
    let m = cols.clone().sum::<f64>() / n;
    let v = cols.map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let s = v.sqrt();
    // Near-constant columns are centred but not scaled.
    (m, if s > 1e-9 * (1.0 + m.abs()) { s } else { 1.0 })
}

pub fn train_global(data: &[LocalExtraction], cfg: &GlobalFitConfig) -> Result<GlobalEnsemble> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    for d in data {
        if !d.mean.is_finite() || !d.sigma.is_finite() || d.sigma.to_array().iter().any(|s| *s < 0.0) {
            return Err(Error::NonFinite(format!("local extraction for set {}", d.set_id)));
        }
    }
    let feats: Vec<[f64; N_FEATURES]> = data.iter().map(|d| features(d.xb, d.t, d.q2)).collect();
    let mut feature_mean = [0.0; N_FEATURES];
    let mut feature_std = [0.0; N_FEATURES];
    for c in 0..N_FEATURES {
        (feature_mean[c], feature_std[c]) = mean_std(feats.iter().map(|f| f[c]));
    }
    let mut target_mean = [0.0; 4];
    let mut target_std = [0.0; 4];
    for k in 0..4 {
        (target_mean[k], target_std[k]) = mean_std(data.iter().map(|d| d.mean.to_array()[k]));
    }
    let x_std: Vec<f64> =
        feats.iter().flat_map(|f| (0..N_FEATURES).map(move |c| (f[c] - feature_mean[c]) / feature_std[c])).collect();

    let replicas: Vec<GlobalReplica> = (0..cfg.n_replicas)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, &[purpose::BOOTSTRAP, r as u64]);
            let n = data.len();
            let mut rng = rng_for(seed, &[purpose::BOOTSTRAP]);
            let idx: Vec<usize> =
                if cfg.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            let x: Vec<f64> =
                idx.iter().flat_map(|&i| x_std[i * N_FEATURES..(i + 1) * N_FEATURES].iter().copied()).collect();
            let mut nets = Vec::with_capacity(4);
            let mut final_loss = [0.0; 4];
            let mut excluded = false;
            for k in 0..4 {
                let mut jrng = rng_for(seed, &[purpose::NOISE, k as u64]);
                let y: Vec<f64> = idx
                    .iter()
                    .map(|&i| {
                        let mut v = data[i].mean.to_array()[k];
                        if cfg.jitter {
                            let z: f64 = StandardNormal.sample(&mut jrng);
                            v += data[i].sigma.to_array()[k] * z;
                        }
                        (v - target_mean[k]) / target_std[k]
                    })
                    .collect();
                let mut irng = rng_for(seed, &[purpose::INIT, k as u64]);
                let mut state = init_net(&cfg.net, &mut irng);
                let mut drng = rng_for(seed, &[purpose::DROPOUT, k as u64]);
                let mut opt = Adam::new(state.params.len(), cfg.learning_rate, cfg.adam);
                let mut grad = vec![0.0; state.params.len()];
                let mut loss = f64::NAN;
                for _ in 0..cfg.epochs {
                    loss = net_loss_grad(&cfg.net, &mut state, &x, &y, &mut drng, &mut grad);
                    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                        excluded = true;
                        break;
                    }
                    opt.step(&mut state.params, &grad);
                }
                final_loss[k] = loss;
                nets.push(state);
            }
            GlobalReplica { replica: r, seed, bootstrap: idx, nets, final_loss, excluded }
        })
        .collect();
    Ok(GlobalEnsemble {
        spec: cfg.net.clone(),
        feature_mean,
        feature_std,
        target_mean,
        target_std,
        support: data.iter().map(|d| [d.xb, d.t, d.q2]).collect(),
        replicas,
    })
}

/// Mean and N-1 normalised standard deviation.
pub fn ensemble_stats(values: &[f64]) -> Result<(f64, f64)> {
    match values.len() {
        0 => Err(Error::EmptyEnsemble),
        1 => Err(Error::InsufficientReplicas { needed: 2, have: 1 }),
        n => {
            let m = values.iter().sum::<f64>() / n as f64;
            let ss = values.iter().map(|v| (v - m).powi(2)).sum::<f64>();
            Ok((m, (ss / (n - 1) as f64).sqrt()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalPrediction {
    pub xb: f64,
    pub t: f64,
    pub q2: f64,
    pub mean: CffSet,
    pub sigma: CffSet,
    /// Outside the convex hull of the training kinematics.
    pub extrapolated: bool,
}

impl GlobalEnsemble {
    pub fn included(&self) -> impl Iterator<Item = &GlobalReplica> {
        self.replicas.iter().filter(|r| !r.excluded)
    }

    fn standardize(&self, pts: &[(f64, f64, f64)]) -> Vec<f64> {
        pts.iter()
            .flat_map(|&(xb, t, q2)| {
                let f = features(xb, t, q2);
                (0..N_FEATURES).map(move |c| (f[c] - self.feature_mean[c]) / self.feature_std[c])
            })
            .collect()
    }

    /// Per-replica predictions, `[replica][point] -> CffSet`.
    pub fn replica_predictions(&self, pts: &[(f64, f64, f64)]) -> Vec<Vec<CffSet>> {
        let x = self.standardize(pts);
        self.included()
            .map(|r| {
                let cols: Vec<Vec<f64>> = (0..4)
                    .map(|k| {
                        net_predict(&self.spec, &r.nets[k], &x)
                            .into_iter()
                            .map(|v| v * self.target_std[k] + self.target_mean[k])
                            .collect()
                    })
                    .collect();
                (0..pts.len()).map(|i| CffSet::new(cols[0][i], cols[1][i], cols[2][i], cols[3][i])).collect()
            })
            .collect()
    }

    pub fn predict_many(&self, pts: &[(f64, f64, f64)]) -> Result<Vec<GlobalPrediction>> {
        let per = self.replica_predictions(pts);
        if per.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let support = self.scaled_support();
        pts.iter()
            .enumerate()
            .map(|(i, &(xb, t, q2))| {
                let mut mean = [0.0; 4];
                let mut sigma = [0.0; 4];
                for k in 0..4 {
                    let v: Vec<f64> = per.iter().map(|r| r[i].to_array()[k]).collect();
                    (mean[k], sigma[k]) = ensemble_stats(&v)?;
                }
                Ok(GlobalPrediction {
                    xb,
                    t,
                    q2,
                    mean: CffSet::from_array(mean),
                    sigma: CffSet::from_array(sigma),
                    extrapolated: !in_convex_hull(&support, &self.scale_point([xb, t, q2])),
                })
            })
            .collect()
    }

    fn scale_point(&self, p: [f64; 3]) -> Vec<f64> {
        (0..3).map(|c| (p[c] - self.feature_mean[c]) / self.feature_std[c]).collect()
    }

    fn scaled_support(&self) -> Vec<Vec<f64>> {
        self.support.iter().map(|p| self.scale_point(*p)).collect()
    }
}

pub fn predict_global(ensemble: &GlobalEnsemble, xb: f64, t: f64, q2: f64) -> Result<GlobalPrediction> {
    Ok(ensemble.predict_many(&[(xb, t, q2)])?.remove(0))
}

/// Regular grid over the given (min, max, n) ranges in (xB, t, Q2).
pub fn kinematic_grid(xb: (f64, f64, usize), t: (f64, f64, usize), q2: (f64, f64, usize)) -> Vec<(f64, f64, f64)> {
    let axis = |(lo, hi, n): (f64, f64, usize)| -> Vec<f64> {
        if n <= 1 {
            vec![lo]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        }
    };
    let (ax, at, aq) = (axis(xb), axis(t), axis(q2));
    let mut out = Vec::with_capacity(ax.len() * at.len() * aq.len());
    for &x in &ax {
        for &tt in &at {
            for &q in &aq {
                out.push((x, tt, q));
            }
        }
    }
    out
}
