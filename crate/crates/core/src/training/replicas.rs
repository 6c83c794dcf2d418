use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_local, BinProblem, FitConfig};
use crate::models::ModelClass;
use crate::physics::CffSet;
use crate::seeds::{derive_seed, purpose, rng_for};
use crate::{Error, Result};

/// Replicas whose final loss exceeds this multiple of the ensemble median
/// are excluded from statistics.
pub const OUTLIER_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// F_i -> F_i + N(0, sigma_i) per replica.
    Gaussian,
    /// Every replica sees the central values.
    Identical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Independent optimiser seed per replica.
    #[default]
    PerReplica,
    /// One optimiser seed for the whole ensemble.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: usize,
    pub seed: u64,
    pub cffs: Option<CffSet>,
    pub final_loss: f64,
    pub epochs_run: usize,
    pub excluded: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaEnsemble {
    pub set_id: u32,
    pub model_class: ModelClass,
    pub records: Vec<ReplicaRecord>,
}

impl ReplicaEnsemble {
    pub fn from_cffs(set_id: u32, model_class: ModelClass, cffs: &[CffSet]) -> Self {
        let records = cffs
            .iter()
            .enumerate()
            .map(|(i, c)| ReplicaRecord {
                replica: i,
                seed: 0,
                cffs: Some(*c),
                final_loss: 0.0,
                epochs_run: 0,
                excluded: false,
                error: None,
            })
            .collect();
        Self { set_id, model_class, records }
    }

    pub fn included(&self) -> Vec<CffSet> {
        self.records.iter().filter(|r| !r.excluded).filter_map(|r| r.cffs).collect()
    }

    pub fn n_excluded(&self) -> usize {
        self.records.iter().filter(|r| r.excluded || r.cffs.is_none()).count()
    }

    /// Flags successful replicas with loss above `OUTLIER_FACTOR` x median.
    pub fn flag_outliers(&mut self) {
        let mut losses: Vec<f64> = self.records.iter().filter(|r| r.cffs.is_some()).map(|r| r.final_loss).collect();
        if losses.is_empty() {
            return;
        }
        losses.sort_by(f64::total_cmp);
        let m = losses.len();
        let median = if m % 2 == 1 { losses[m / 2] } else { 0.5 * (losses[m / 2 - 1] + losses[m / 2]) };
        for r in &mut self.records {
            r.excluded = r.cffs.is_none() || r.final_loss > OUTLIER_FACTOR * median;
        }
    }
}

/// Central values for replica `replica` under `mode`.
pub fn replica_data(problem: &BinProblem, mode: ResampleMode, seed: u64, replica: usize) -> Vec<f64> {
    match mode {
        ResampleMode::Identical => problem.data.clone(),
        ResampleMode::Gaussian => {
            let mut rng = rng_for(seed, &[purpose::NOISE, problem.set_id as u64, replica as u64]);
            problem
                .data
                .iter()
                .zip(&problem.sigma)
                .map(|(f, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    f + s * z
                })
                .collect()
        }
    }
}

/// Fits `n_replicas` independent replicas; the result is the same whatever
/// the thread count.
pub fn fit_replicas(
    class: ModelClass,
    problem: &BinProblem,
    n_replicas: usize,
    mode: ResampleMode,
    seed_policy: SeedPolicy,
    config: &FitConfig,
) -> Result<ReplicaEnsemble> {
    if n_replicas < 2 {
        return Err(Error::Config(format!("need at least 2 replicas, got {n_replicas}")));
    }
    config.validate(class)?;
    let master = config.seed;
    let records = (0..n_replicas)
        .into_par_iter()
        .map(|r| {
            let seed = match seed_policy {
                SeedPolicy::PerReplica => derive_seed(master, &[purpose::REPLICA, problem.set_id as u64, r as u64]),
                SeedPolicy::Shared => derive_seed(master, &[purpose::REPLICA, problem.set_id as u64]),
            };
            let data = replica_data(problem, mode, master, r);
            let cfg = FitConfig { seed, ..config.clone() };
            match fit_local(class, &problem.with_data(data), &cfg) {
                Ok(fit) => ReplicaRecord {
                    replica: r,
                    seed,
                    cffs: Some(fit.cffs),
                    final_loss: fit.final_loss,
                    epochs_run: fit.epochs_run,
                    excluded: false,
                    error: None,
                },
                Err(e) => ReplicaRecord {
                    replica: r,
                    seed,
                    cffs: None,
                    final_loss: f64::NAN,
                    epochs_run: 0,
                    excluded: true,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut ens = ReplicaEnsemble { set_id: problem.set_id, model_class: class, records };
    ens.flag_outliers();
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::PhysicsConstants;
    use crate::training::tests::toy_bin;

    fn problem() -> BinProblem {
        let p = BinProblem::new(&toy_bin(), &PhysicsConstants::default()).unwrap();
        let data = p.basis.predict(&CffSet::new(-1.0, 0.5, 1.2, 0.01));
        let sigma = data.iter().map(|f| 0.05 * f.abs()).collect();
        BinProblem { data, sigma, ..p }
    }

    #[test]
    fn identical_shared_seed_has_zero_spread() {
        let cfg = FitConfig { epochs: 30, seed: 4, ..Default::default() };
        let e =
            fit_replicas(ModelClass::Cdnn, &problem(), 3, ResampleMode::Identical, SeedPolicy::Shared, &cfg).unwrap();
        let c = e.included();
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|x| *x == c[0]));
    }

    #[test]
    fn gaussian_replicas_differ_and_are_reproducible() {
        let cfg = FitConfig { epochs: 10, seed: 4, ..Default::default() };
        let run = || {
            fit_replicas(ModelClass::Cdnn, &problem(), 3, ResampleMode::Gaussian, SeedPolicy::PerReplica, &cfg).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        let c = a.included();
        assert_ne!(c[0], c[1]);
        assert_ne!(a.records[0].seed, a.records[1].seed);
    }

    #[test]
    fn outliers_are_flagged() {
        let mut e = ReplicaEnsemble::from_cffs(1, ModelClass::Cdnn, &[CffSet::default(); 5]);
        for (r, l) in e.records.iter_mut().zip([1.0, 1.2, 0.9, 50.0, 1.1]) {
            r.final_loss = l;
        }
        e.flag_outliers();
        assert_eq!(e.n_excluded(), 1);
        assert!(e.records[3].excluded);
    }

    #[test]
    fn rejects_single_replica() {
        let cfg = FitConfig { epochs: 1, ..Default::default() };
        assert!(
            fit_replicas(ModelClass::Cdnn, &problem(), 1, ResampleMode::Identical, SeedPolicy::Shared, &cfg).is_err()
        );
    }
}
