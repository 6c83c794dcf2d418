use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Tanh,
    Relu6,
    Tanhshrink,
}

const LEAKY_SLOPE: f64 = 0.01;

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Relu => x.max(0.0),
            Self::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Self::Tanh => x.tanh(),
            Self::Relu6 => x.clamp(0.0, 6.0),
            Self::Tanhshrink => x - x.tanh(),
        }
    }

    /// Derivative with respect to the pre-activation `x`.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Relu => (x > 0.0) as u8 as f64,
            Self::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Self::Tanh => 1.0 - x.tanh().powi(2),
            Self::Relu6 => (x > 0.0 && x < 6.0) as u8 as f64,
            Self::Tanhshrink => x.tanh().powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn n_params(&self) -> usize {
        self.n_in * self.n_out + self.n_out
    }
}

/// Stack of dense layers. Parameters are stored flat, layer by layer, each
/// as a row-major `n_out x n_in` weight block followed by `n_out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layers: Vec<DenseLayer>,
}

impl MlpSpec {
    /// `widths = [in, h1, ..., out]`; `hidden` applies to every layer but
    /// the last, which is linear.
    pub fn from_widths(widths: &[usize], hidden: Activation) -> Self {
        let n = widths.len().saturating_sub(1);
        let layers = (0..n)
            .map(|i| DenseLayer {
                n_in: widths[i],
                n_out: widths[i + 1],
                activation: if i + 1 == n { Activation::Identity } else { hidden },
            })
            .collect();
        Self { layers }
    }

    /// 3 -> 64, eight 64 -> 64 hidden layers, 64 -> 4; ReLU throughout.
    pub fn cdnn() -> Self {
        let mut w = vec![3];
        w.extend(std::iter::repeat_n(64, 9));
        w.push(4);
        Self::from_widths(&w, Activation::Relu)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    pub fn n_inputs(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    /// Dense layer 2MN plus one op per activated output.
    pub fn n_flops(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                let act = if l.activation == Activation::Identity { 0 } else { l.n_out };
                2 * l.n_in * l.n_out + act
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("MLP without layers".into()));
        }
        for w in self.layers.windows(2) {
            if w[0].n_out != w[1].n_in {
                return Err(Error::Shape(format!("layer widths {} -> {} do not chain", w[0].n_out, w[1].n_in)));
            }
        }
        Ok(())
    }

    fn check(&self, params: &[f64], x: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!("expected {} MLP parameters, got {}", self.n_params(), params.len())));
        }
        if x.len() != self.n_inputs() {
            return Err(Error::Shape(format!("expected {} inputs, got {}", self.n_inputs(), x.len())));
        }
        Ok(())
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpTape {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
}

fn dense(layer: &DenseLayer, p: &[f64], x: &[f64], out: &mut Vec<f64>) {
    let (w, b) = p.split_at(layer.n_in * layer.n_out);
    out.clear();
    for o in 0..layer.n_out {
        let row = &w[o * layer.n_in..(o + 1) * layer.n_in];
        let mut acc = b[o];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out.push(acc);
    }
}

pub fn mlp_forward(spec: &MlpSpec, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    Ok(mlp_forward_tape(spec, params, x)?.0)
}

pub fn mlp_forward_tape(spec: &MlpSpec, params: &[f64], x: &[f64]) -> Result<(Vec<f64>, MlpTape)> {
    spec.check(params, x)?;
    let mut tape = MlpTape::default();
    let mut h = x.to_vec();
    let mut off = 0;
    for layer in &spec.layers {
        let np = layer.n_params();
        let mut z = Vec::with_capacity(layer.n_out);
        dense(layer, &params[off..off + np], &h, &mut z);
        off += np;
        let next = z.iter().map(|&v| layer.activation.apply(v)).collect();
        tape.inputs.push(std::mem::replace(&mut h, next));
        tape.pre.push(z);
    }
    Ok((h, tape))
}

/// Reverse pass: accumulates d(out . dout)/d params into `grad` and
/// returns the gradient with respect to the input.
pub fn mlp_backward(spec: &MlpSpec, params: &[f64], tape: &MlpTape, dout: &[f64], grad: &mut [f64]) -> Vec<f64> {
    let mut delta = dout.to_vec();
    let mut end = spec.n_params();
    for (li, layer) in spec.layers.iter().enumerate().rev() {
        let start = end - layer.n_params();
        let (w, _) = params[start..end].split_at(layer.n_in * layer.n_out);
        let (gw, gb) = grad[start..end].split_at_mut(layer.n_in * layer.n_out);
        for (d, z) in delta.iter_mut().zip(&tape.pre[li]) {
            *d *= layer.activation.derivative(*z);
        }
        let x = &tape.inputs[li];
        let mut dx = vec![0.0; layer.n_in];
        for o in 0..layer.n_out {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            let row = o * layer.n_in;
            for i in 0..layer.n_in {
                gw[row + i] += d * x[i];
                dx[i] += d * w[row + i];
            }
        }
        delta = dx;
        end = start;
    }
    delta
}
