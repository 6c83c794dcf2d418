//! Fully connected regressor with optional batch normalisation and dropout,
//! trained full-batch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::Activation;
use crate::{Error, Result};

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenLayer {
    pub width: usize,
    pub activation: Activation,
    pub batch_norm: bool,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalNetSpec {
    pub n_inputs: usize,
    pub hidden: Vec<HiddenLayer>,
}

pub const DEFAULT_ACTIVATIONS: [Activation; 8] = [
    Activation::Relu,
    Activation::LeakyRelu,
    Activation::Tanh,
    Activation::Relu6,
    Activation::Tanhshrink,
    Activation::Relu,
    Activation::Tanh,
    Activation::LeakyRelu,
];
pub const DEFAULT_BATCH_NORM: [bool; 8] = [true, false, false, false, true, false, false, false];

impl Default for GlobalNetSpec {
    /// 4 inputs, 8 hidden layers of 36, dropout 0.1, one linear output.
    fn default() -> Self {
        let hidden = (0..8)
            .map(|l| HiddenLayer {
                width: 36,
                activation: DEFAULT_ACTIVATIONS[l],
                batch_norm: DEFAULT_BATCH_NORM[l],
                dropout: 0.1,
            })
            .collect();
        Self { n_inputs: 4, hidden }
    }
}

impl GlobalNetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.hidden.is_empty() {
            return Err(Error::Config("global net needs inputs and at least one hidden layer".into()));
        }
        for (i, h) in self.hidden.iter().enumerate() {
            if h.width == 0 {
                return Err(Error::Config(format!("hidden layer {i} has width 0")));
            }
            if !(0.0..1.0).contains(&h.dropout) {
                return Err(Error::Config(format!("hidden layer {i} dropout {} not in [0, 1)", h.dropout)));
            }
        }
        Ok(())
    }

    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.n_inputs
        } else {
            self.hidden[l - 1].width
        }
    }

    /// Offsets of (W, b, gamma, beta) for hidden layer `l`, then the output.
    fn offsets(&self) -> (Vec<usize>, usize) {
        let mut off = Vec::with_capacity(self.hidden.len());
        let mut o = 0;
        for (l, h) in self.hidden.iter().enumerate() {
            off.push(o);
            o += h.width * self.layer_in(l) + h.width;
            if h.batch_norm {
                o += 2 * h.width;
            }
        }
        (off, o)
    }

    pub fn n_params(&self) -> usize {
        let (_, o) = self.offsets();
        o + self.hidden.last().map_or(self.n_inputs, |h| h.width) + 1
    }

    fn n_bn(&self) -> usize {
        self.hidden.iter().filter(|h| h.batch_norm).map(|h| h.width).sum()
    }
}

/// Trainable parameters plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetState {
    pub params: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

pub fn init_net(spec: &GlobalNetSpec, rng: &mut impl Rng) -> NetState {
    let mut params = Vec::with_capacity(spec.n_params());
    let mut fan_in = spec.n_inputs;
    fn push_dense(params: &mut Vec<f64>, n_in: usize, n_out: usize, rng: &mut impl Rng) {
        let b = 1.0 / (n_in as f64).sqrt();
        for _ in 0..n_in * n_out + n_out {
            params.push(rng.random_range(-b..b));
        }
    }
    for h in &spec.hidden {
        push_dense(&mut params, fan_in, h.width, rng);
        if h.batch_norm {
            params.extend(std::iter::repeat_n(1.0, h.width));
            params.extend(std::iter::repeat_n(0.0, h.width));
        }
        fan_in = h.width;
    }
    push_dense(&mut params, fan_in, 1, rng);
    let n_bn = spec.n_bn();
    NetState { params, running_mean: vec![0.0; n_bn], running_var: vec![1.0; n_bn] }
}

fn dense(x: &[f64], n_in: usize, w: &[f64], b: &[f64], n_out: usize) -> Vec<f64> {
    let batch = x.len() / n_in;
    let mut z = vec![0.0; batch * n_out];
    for r in 0..batch {
        let xr = &x[r * n_in..(r + 1) * n_in];
        for o in 0..n_out {
            let wr = &w[o * n_in..(o + 1) * n_in];
            z[r * n_out + o] = b[o] + wr.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    z
}

/// Inference: running batch-norm statistics, no dropout. `x` is row-major
/// `batch x n_inputs`.
pub fn net_predict(spec: &GlobalNetSpec, state: &NetState, x: &[f64]) -> Vec<f64> {
    let (off, out_off) = spec.offsets();
    let p = &state.params;
    let mut a = x.to_vec();
    let mut bn_off = 0;
    for (l, h) in spec.hidden.iter().enumerate() {
        let n_in = spec.layer_in(l);
        let w_len = h.width * n_in;
        let o = off[l];
        let mut z = dense(&a, n_in, &p[o..o + w_len], &p[o + w_len..o + w_len + h.width], h.width);
        if h.batch_norm {
            let g = &p[o + w_len + h.width..o + w_len + 2 * h.width];
            let be = &p[o + w_len + 2 * h.width..o + w_len + 3 * h.width];
            for (i, v) in z.iter_mut().enumerate() {
                let j = i % h.width;
                let m = state.running_mean[bn_off + j];
                let var = state.running_var[bn_off + j];
                *v = g[j] * (*v - m) / (var + BN_EPS).sqrt() + be[j];
            }
            bn_off += h.width;
        }
        z.iter_mut().for_each(|v| *v = h.activation.apply(*v));
        a = z;
    }
    let n_in = spec.hidden.last().unwrap().width;
    dense(&a, n_in, &p[out_off..out_off + n_in], &p[out_off + n_in..out_off + n_in + 1], 1)
}

struct LayerTape {
    input: Vec<f64>,
    pre_act: Vec<f64>,
    zhat: Vec<f64>,
    inv_std: Vec<f64>,
    mask: Vec<f64>,
}

/// One full-batch training step: returns the mean squared error before the
/// update and fills `grad`. Updates running batch-norm statistics.
pub fn net_loss_grad(
    spec: &GlobalNetSpec,
    state: &mut NetState,
    x: &[f64],
    y: &[f64],
    rng: &mut impl Rng,
    grad: &mut [f64],
) -> f64 {
    let (off, out_off) = spec.offsets();
    let batch = y.len();
    let bf = batch as f64;
    let p = &state.params;
    let mut tapes = Vec::with_capacity(spec.hidden.len());
    let mut a = x.to_vec();
    let mut bn_off = 0;
    for (l, h) in spec.hidden.iter().enumerate() {
        let n_in = spec.layer_in(l);
        let w = h.width;
        let o = off[l];
        let mut z = dense(&a, n_in, &p[o..o + w * n_in], &p[o + w * n_in..o + w * n_in + w], w);
        let mut zhat = Vec::new();
        let mut inv_std = Vec::new();
        if h.batch_norm {
            let g = &p[o + w * n_in + w..o + w * n_in + 2 * w];
            let be = &p[o + w * n_in + 2 * w..o + w * n_in + 3 * w];
            zhat = vec![0.0; z.len()];
            inv_std = vec![0.0; w];
            for j in 0..w {
                let mean = (0..batch).map(|r| z[r * w + j]).sum::<f64>() / bf;
                let var = (0..batch).map(|r| (z[r * w + j] - mean).powi(2)).sum::<f64>() / bf;
                let is = 1.0 / (var + BN_EPS).sqrt();
                inv_std[j] = is;
                for r in 0..batch {
                    let zh = (z[r * w + j] - mean) * is;
                    zhat[r * w + j] = zh;
                    z[r * w + j] = g[j] * zh + be[j];
                }
                let unbiased = if batch > 1 { var * bf / (bf - 1.0) } else { var };
                let rm = &mut state.running_mean[bn_off + j];
                *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * mean;
                let rv = &mut state.running_var[bn_off + j];
                *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * unbiased;
            }
            bn_off += w;
        }
        let pre_act = z.clone();
        let keep = 1.0 - h.dropout;
        let mask: Vec<f64> = if h.dropout > 0.0 {
            (0..z.len()).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
        } else {
            Vec::new()
        };
        for (i, v) in z.iter_mut().enumerate() {
            *v = h.activation.apply(*v) * mask.get(i).copied().unwrap_or(1.0);
        }
        tapes.push(LayerTape { input: a, pre_act, zhat, inv_std, mask });
        a = z;
    }
    let n_last = spec.hidden.last().unwrap().width;
    let w_out = &p[out_off..out_off + n_last];
    let out = dense(&a, n_last, w_out, &p[out_off + n_last..out_off + n_last + 1], 1);

    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let mut d = vec![0.0; batch * n_last];
    for r in 0..batch {
        let e = out[r] - y[r];
        loss += e * e / bf;
        let dout = 2.0 * e / bf;
        grad[out_off + n_last] += dout;
        for j in 0..n_last {
            grad[out_off + j] += dout * a[r * n_last + j];
            d[r * n_last + j] = dout * w_out[j];
        }
    }

    for l in (0..spec.hidden.len()).rev() {
        let h = &spec.hidden[l];
        let t = &tapes[l];
        let n_in = spec.layer_in(l);
        let w = h.width;
        let o = off[l];
        for (i, dv) in d.iter_mut().enumerate() {
            let m = t.mask.get(i).copied().unwrap_or(1.0);
            *dv *= m * h.activation.derivative(t.pre_act[i]);
        }
        if h.batch_norm {
            let g = &p[o + w * n_in + w..o + w * n_in + 2 * w];
            for j in 0..w {
                let mut sum_dy = 0.0;
                let mut sum_dy_zh = 0.0;
                for r in 0..batch {
                    let dy = d[r * w + j];
                    sum_dy += dy;
                    sum_dy_zh += dy * t.zhat[r * w + j];
                }
                grad[o + w * n_in + w + j] += sum_dy_zh;
                grad[o + w * n_in + 2 * w + j] += sum_dy;
                // dz = g inv_std / B (B dy - sum dy - zhat sum dy zhat)
                let k = g[j] * t.inv_std[j] / bf;
                for r in 0..batch {
                    let i = r * w + j;
                    d[i] = k * (bf * d[i] - sum_dy - t.zhat[i] * sum_dy_zh);
                }
            }
        }
        let mut dx = vec![0.0; batch * n_in];
        for r in 0..batch {
            let xr = &t.input[r * n_in..(r + 1) * n_in];
            for j in 0..w {
                let dz = d[r * w + j];
                if dz == 0.0 {
                    continue;
                }
                grad[o + w * n_in + j] += dz;
                let wr = &p[o + j * n_in..o + (j + 1) * n_in];
                let gw = &mut grad[o + j * n_in..o + (j + 1) * n_in];
                for c in 0..n_in {
                    gw[c] += dz * xr[c];
                    dx[r * n_in + c] += dz * wr[c];
                }
            }
        }
        d = dx;
    }
    loss
}
