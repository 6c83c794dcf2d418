//! Regressors mapping bin kinematics (xB, Q2, t) to a [`CffSet`].

mod mlp;
mod qdnn;

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use mlp::{mlp_backward, mlp_forward, mlp_forward_tape, Activation, DenseLayer, MlpSpec, MlpTape};
pub use qdnn::{qdnn_forward, qdnn_vjp, QdnnSpec};

use crate::physics::CffSet;
use crate::qsim::{EntanglerRange, QuantumGradient};
use crate::seeds::{purpose, rng_for};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    Cdnn,
    BasicQdnn,
    Fqdnn,
}

impl ModelClass {
    pub const ALL: [ModelClass; 3] = [Self::Cdnn, Self::BasicQdnn, Self::Fqdnn];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cdnn => "cdnn",
            Self::BasicQdnn => "basic_qdnn",
            Self::Fqdnn => "fqdnn",
        }
    }

    pub fn is_quantum(self) -> bool {
        !matches!(self, Self::Cdnn)
    }

    pub fn default_init(self) -> InitScheme {
        match self {
            Self::Cdnn | Self::BasicQdnn => InitScheme::SmallAngle { sigma0: 0.1 },
            Self::Fqdnn => InitScheme::DepthScaled { sigma0: 0.3 },
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        match self {
            Self::Cdnn => 1e-3,
            _ => 5e-3,
        }
    }

    /// Architecture at the start of training; FQDNN starts shallow and
    /// grows.
    pub fn initial_spec(self, final_layers: usize, start_layers: usize) -> ModelSpec {
        match self {
            Self::Cdnn => ModelSpec::Cdnn(MlpSpec::cdnn()),
            Self::BasicQdnn => ModelSpec::Qdnn(QdnnSpec::new(final_layers, EntanglerRange::Cyclic)),
            Self::Fqdnn => ModelSpec::Qdnn(QdnnSpec::new(start_layers, EntanglerRange::Fixed(1))),
        }
    }
}

impl std::str::FromStr for ModelClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::Config(format!("unknown model class '{s}'")))
    }
}

impl std::fmt::Display for ModelClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Circuit-angle initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum InitScheme {
    SmallAngle {
        sigma0: f64,
    },
    /// Layer l drawn with std sigma0 / sqrt(l + 1).
    DepthScaled {
        sigma0: f64,
    },
}

impl InitScheme {
    pub fn layer_std(&self, layer: usize) -> f64 {
        match *self {
            Self::SmallAngle { sigma0 } => sigma0,
            Self::DepthScaled { sigma0 } => sigma0 / ((layer + 1) as f64).sqrt(),
        }
    }

    /// Angles of one layer, drawn from a stream that depends only on
    /// (seed, layer) so grown circuits match circuits built at full depth.
    pub fn sample_layer(&self, seed: u64, layer: usize, n_qubits: usize) -> Vec<f64> {
        let normal = Normal::new(0.0, self.layer_std(layer)).expect("finite std");
        let mut rng = rng_for(seed, &[purpose::ANGLES, layer as u64]);
        (0..n_qubits * 3).map(|_| normal.sample(&mut rng)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelSpec {
    Cdnn(MlpSpec),
    Qdnn(QdnnSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelComplexity {
    pub n_params: usize,
    pub n_flops: usize,
}

pub fn count_params(spec: &ModelSpec) -> usize {
    match spec {
        ModelSpec::Cdnn(m) => m.n_params(),
        ModelSpec::Qdnn(q) => q.n_params(),
    }
}

pub fn count_flops(spec: &ModelSpec) -> usize {
    match spec {
        ModelSpec::Cdnn(m) => m.n_flops(),
        ModelSpec::Qdnn(q) => q.n_flops(),
    }
}

pub fn complexity(spec: &ModelSpec) -> ModelComplexity {
    ModelComplexity { n_params: count_params(spec), n_flops: count_flops(spec) }
}

/// Trainable circuit angles of L strongly entangling layers on n qubits.
pub fn sel_param_count(n_layers: usize, n_qubits: usize) -> usize {
    n_layers * n_qubits * 3
}

impl ModelSpec {
    pub fn n_params(&self) -> usize {
        count_params(self)
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<CffSet> {
        let out = match self {
            ModelSpec::Cdnn(m) => mlp_forward(m, params, x)?,
            ModelSpec::Qdnn(q) => qdnn_forward(q, params, x)?,
        };
        let c = CffSet::from_slice(&out)?;
        if !c.is_finite() {
            return Err(Error::NonFinite("model output".into()));
        }
        Ok(c)
    }

    /// Forward output and d(out . dcff)/d params accumulated into `grad`.
    pub fn vjp(
        &self,
        params: &[f64],
        x: &[f64],
        dcff: [f64; 4],
        grad: &mut [f64],
        method: QuantumGradient,
    ) -> Result<CffSet> {
        let out = match self {
            ModelSpec::Cdnn(m) => {
                let (out, tape) = mlp_forward_tape(m, params, x)?;
                mlp_backward(m, params, &tape, &dcff, grad);
                out
            }
            ModelSpec::Qdnn(q) => qdnn_vjp(q, params, x, &dcff, grad, method)?,
        };
        CffSet::from_slice(&out)
    }

    pub fn n_layers(&self) -> usize {
        match self {
            ModelSpec::Cdnn(_) => 0,
            ModelSpec::Qdnn(q) => q.n_layers,
        }
    }
}

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias of an MLP.
fn init_mlp(spec: &MlpSpec, rng: &mut impl Rng, out: &mut Vec<f64>) {
    for l in &spec.layers {
        let bound = 1.0 / (l.n_in as f64).sqrt();
        for _ in 0..l.n_params() {
            out.push(rng.random_range(-bound..bound));
        }
    }
}

pub fn init_params(spec: &ModelSpec, scheme: InitScheme, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, &[purpose::INIT]);
    let mut p = Vec::with_capacity(spec.n_params());
    match spec {
        ModelSpec::Cdnn(m) => init_mlp(m, &mut rng, &mut p),
        ModelSpec::Qdnn(q) => {
            let bound = 1.0 / (q.n_inputs as f64).sqrt();
            for _ in 0..q.pre_len() {
                p.push(rng.random_range(-bound..bound));
            }
            for l in 0..q.n_layers {
                p.extend(scheme.sample_layer(seed, l, q.n_qubits));
            }
            init_mlp(&q.head(), &mut rng, &mut p);
        }
    }
    p
}

/// Appends circuit layers up to `new_layers`; existing values are kept
/// bit for bit and new layers are drawn at their own depth index.
pub fn grow_depth(
    spec: &QdnnSpec,
    params: &[f64],
    new_layers: usize,
    scheme: InitScheme,
    seed: u64,
) -> Result<(QdnnSpec, Vec<f64>)> {
    if new_layers < spec.n_layers {
        return Err(Error::Config(format!("cannot shrink circuit from {} to {new_layers} layers", spec.n_layers)));
    }
    if params.len() != spec.n_params() {
        return Err(Error::Shape(format!("expected {} parameters, got {}", spec.n_params(), params.len())));
    }
    let at = spec.pre_len() + spec.n_angles();
    let mut out = params[..at].to_vec();
    for l in spec.n_layers..new_layers {
        out.extend(scheme.sample_layer(seed, l, spec.n_qubits));
    }
    out.extend_from_slice(&params[at..]);
    let grown = QdnnSpec { n_layers: new_layers, ..spec.clone() };
    Ok((grown, out))
}

pub const CHECKPOINT_FORMAT: &str = "cffq-checkpoint/1";

/// Serialised model: architecture header, seed and raw parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model_class: ModelClass,
    pub spec: ModelSpec,
    pub seed: u64,
    pub n_params: usize,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(model_class: ModelClass, spec: ModelSpec, seed: u64, params: Vec<f64>) -> Self {
        Self { format: CHECKPOINT_FORMAT.into(), model_class, n_params: params.len(), spec, seed, params }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Schema {
                location: path.display().to_string(),
                message: format!("unsupported checkpoint format '{}'", c.format),
            });
        }
        if c.params.len() != c.n_params || c.spec.n_params() != c.n_params {
            return Err(Error::Schema {
                location: path.display().to_string(),
                message: "parameter count does not match the architecture".into(),
            });
        }
        Ok(c)
    }
}
