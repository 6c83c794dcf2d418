//! Per-bin local fits of the regressors through the forward model, and
//! replica ensembles built on top of them.

mod replicas;

pub use replicas::{fit_replicas, ReplicaEnsemble, ReplicaRecord, ResampleMode, SeedPolicy, OUTLIER_FACTOR};

use serde::{Deserialize, Serialize};

use crate::data::KinematicBin;
use crate::models::{grow_depth, init_params, InitScheme, ModelClass, ModelSpec};
use crate::optim::{Adam, AdamConfig};
use crate::physics::{derive_kinematics, kelly_form_factors, CffSet, CrossSectionBasis, PhysicsConstants};
use crate::qsim::QuantumGradient;
use crate::{Error, Result};

/// A bin prepared for fitting: the affine forward-model basis on the
/// bin's phi-grid plus data and uncertainties.
#[derive(Debug, Clone)]
pub struct BinProblem {
    pub set_id: u32,
    pub inputs: [f64; 3],
    pub basis: CrossSectionBasis,
    pub data: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl BinProblem {
    pub fn new(bin: &KinematicBin, constants: &PhysicsConstants) -> Result<Self> {
        bin.validate()?;
        let kin = derive_kinematics(bin.k, bin.q2, bin.xb, bin.t, constants, false)?;
        let ff = kelly_form_factors(kin.t, constants);
        let basis = CrossSectionBasis::new(&kin, &ff, constants, &bin.phis())?;
        Ok(Self { set_id: bin.set_id, inputs: bin.inputs(), basis, data: bin.values(), sigma: bin.sigmas() })
    }

    /// Same bin with replaced central values.
    pub fn with_data(&self, data: Vec<f64>) -> Self {
        Self { data, ..self.clone() }
    }

    /// (1/N) sum ((F_pred - F) / sigma)^2 and its gradient in the CFFs.
    pub fn loss_and_grad(&self, cffs: &CffSet) -> Result<(f64, [f64; 4])> {
        let n = self.data.len() as f64;
        let mut loss = 0.0;
        let mut g = [0.0; 4];
        for i in 0..self.data.len() {
            let r = (self.basis.predict_at(i, cffs) - self.data[i]) / self.sigma[i];
            loss += r * r;
            let d = 2.0 * r / (self.sigma[i] * n);
            for (gk, bk) in g.iter_mut().zip(self.basis.gradient_at(i)) {
                *gk += d * bk;
            }
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        Ok((loss, g))
    }

    pub fn loss(&self, cffs: &CffSet) -> Result<f64> {
        Ok(self.loss_and_grad(cffs)?.0)
    }
}

/// Loss of a model's parameters on a bin.
pub fn loss(spec: &ModelSpec, params: &[f64], problem: &BinProblem) -> Result<f64> {
    problem.loss(&spec.forward(params, &problem.inputs)?)
}

/// Circuit depth schedule for layer-wise training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GrowthSchedule {
    Fixed,
    /// `depths[i]` becomes active at epoch `i * epochs / depths.len()`.
    LayerWise {
        depths: Vec<usize>,
    },
}

impl GrowthSchedule {
    pub fn default_for(class: ModelClass) -> Self {
        match class {
            ModelClass::Fqdnn => Self::LayerWise { depths: vec![2, 4, 6, 8] },
            _ => Self::Fixed,
        }
    }

    /// (epoch, depth) pairs.
    pub fn milestones(&self, epochs: usize) -> Vec<(usize, usize)> {
        match self {
            Self::Fixed => Vec::new(),
            Self::LayerWise { depths } => {
                depths.iter().enumerate().map(|(i, &d)| (i * epochs / depths.len(), d)).collect()
            }
        }
    }

    pub fn validate(&self, final_layers: usize) -> Result<()> {
        if let Self::LayerWise { depths } = self {
            if depths.is_empty() || depths.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Config("growth depths must be non-decreasing".into()));
            }
            if *depths.last().unwrap() != final_layers {
                return Err(Error::Config(format!(
                    "growth must end at depth {final_layers}, ends at {}",
                    depths.last().unwrap()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub epochs: usize,
    /// Falls back to the model class default when absent.
    pub learning_rate: Option<f64>,
    pub adam: AdamConfig,
    pub n_layers: usize,
    pub growth: Option<GrowthSchedule>,
    pub init: Option<InitScheme>,
    pub gradient: QuantumGradient,
    /// Stop once the best loss has not improved by a relative 1e-9 for this
    /// many epochs; 0 disables.
    pub patience: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: None,
            adam: AdamConfig::default(),
            n_layers: 8,
            growth: None,
            init: None,
            gradient: QuantumGradient::ParameterShift,
            patience: 0,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, class: ModelClass) -> Result<()> {
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("learning rate {lr} must be positive")));
            }
        }
        if class.is_quantum() && self.n_layers == 0 {
            return Err(Error::Config("circuit depth must be positive".into()));
        }
        self.growth_for(class).validate(self.n_layers)
    }

    pub fn growth_for(&self, class: ModelClass) -> GrowthSchedule {
        match class {
            ModelClass::Cdnn | ModelClass::BasicQdnn => GrowthSchedule::Fixed,
            ModelClass::Fqdnn => self.growth.clone().unwrap_or_else(|| GrowthSchedule::default_for(class)),
        }
    }

    pub fn init_for(&self, class: ModelClass) -> InitScheme {
        self.init.unwrap_or_else(|| class.default_init())
    }

    pub fn lr_for(&self, class: ModelClass) -> f64 {
        self.learning_rate.unwrap_or_else(|| class.default_learning_rate())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model_class: ModelClass,
    pub spec: ModelSpec,
    pub params: Vec<f64>,
    pub seed: u64,
    pub cffs: CffSet,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs_run: usize,
    /// Loss at the start of each epoch.
    pub trace: Vec<f64>,
}

/// Adam on the local loss. Returns the lowest-loss parameters seen, so the
/// result is never worse than the initialisation.
pub fn fit_local(class: ModelClass, problem: &BinProblem, config: &FitConfig) -> Result<FitResult> {
    config.validate(class)?;
    let growth = config.growth_for(class);
    let milestones = growth.milestones(config.epochs);
    let start_layers = milestones.first().map_or(config.n_layers, |m| m.1);
    let scheme = config.init_for(class);
    let mut spec = class.initial_spec(config.n_layers, start_layers);
    let mut params = init_params(&spec, scheme, config.seed);
    let mut opt = Adam::new(params.len(), config.lr_for(class), config.adam);
    let x = problem.inputs;

    let initial_loss = loss(&spec, &params, problem)?;
    let mut best = (initial_loss, spec.clone(), params.clone());
    let mut trace = Vec::with_capacity(config.epochs);
    let mut since_best = 0;
    let mut grad = vec![0.0; params.len()];
    let mut epochs_run = 0;

    for epoch in 0..config.epochs {
        if let ModelSpec::Qdnn(q) = &spec {
            if let Some(&(_, depth)) = milestones.iter().rev().find(|m| m.0 <= epoch) {
                if depth > q.n_layers {
                    let at = q.pre_len() + q.n_angles();
                    let added = (depth - q.n_layers) * q.n_qubits * 3;
                    let (q2, p2) = grow_depth(q, &params, depth, scheme, config.seed)?;
                    opt.insert(at, added);
                    spec = ModelSpec::Qdnn(q2);
                    params = p2;
                    grad = vec![0.0; params.len()];
                }
            }
        }
        let cffs = spec.forward(&params, &x).map_err(|_| Error::Divergence { epoch, loss: f64::NAN })?;
        let (l, dcff) = problem.loss_and_grad(&cffs).map_err(|_| Error::Divergence { epoch, loss: f64::NAN })?;
        trace.push(l);
        if l < best.0 * (1.0 - 1e-9) {
            since_best = 0;
        } else {
            since_best += 1;
        }
        if l < best.0 {
            best = (l, spec.clone(), params.clone());
        }
        if config.patience > 0 && since_best >= config.patience {
            break;
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        spec.vjp(&params, &x, dcff, &mut grad, config.gradient)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch, loss: l });
        }
        opt.step(&mut params, &grad);
        epochs_run = epoch + 1;
    }
    if epochs_run > 0 {
        if let Ok(l) = loss(&spec, &params, problem) {
            if l < best.0 {
                best = (l, spec, params);
            }
        }
    }
    let (final_loss, spec, params) = best;
    let cffs = spec.forward(&params, &x)?;
    Ok(FitResult {
        model_class: class,
        spec,
        params,
        seed: config.seed,
        cffs,
        initial_loss,
        final_loss,
        epochs_run,
        trace,
    })
}
