use serde::{Deserialize, Serialize};

use super::mlp::{mlp_backward, mlp_forward, mlp_forward_tape, Activation, MlpSpec};
use crate::qsim::{
    adjoint_vjp, feature_jacobian, parameter_shift_jacobian, run_circuit, CircuitParams, EntanglerRange,
    QuantumGradient,
};
use crate::{Error, Result};

/// Hybrid regressor: affine map to n angles, angle embedding, L strongly
/// entangling layers, Z readout, then a tanh head.
///
/// Flat parameter layout: pre-layer weights and biases, then the L x n x 3
/// circuit angles, then the head MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdnnSpec {
    pub n_inputs: usize,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub entangle_range: EntanglerRange,
    pub hidden: usize,
    pub n_outputs: usize,
}

impl QdnnSpec {
    pub fn new(n_layers: usize, entangle_range: EntanglerRange) -> Self {
        Self { n_inputs: 3, n_qubits: 6, n_layers, entangle_range, hidden: 64, n_outputs: 4 }
    }

    pub fn pre_len(&self) -> usize {
        self.n_qubits * self.n_inputs + self.n_qubits
    }

    pub fn n_angles(&self) -> usize {
        self.n_layers * self.n_qubits * 3
    }

    pub fn head(&self) -> MlpSpec {
        MlpSpec::from_widths(&[self.n_qubits, self.hidden, self.n_outputs], Activation::Tanh)
    }

    pub fn n_params(&self) -> usize {
        self.pre_len() + self.n_angles() + self.head().n_params()
    }

    /// FLOP convention with every quantum-side width taken as the state
    /// dimension 2^n: embedding map 2*in*dim, each layer a dense dim x dim
    /// product, head input width dim, plus one op per tanh output.
    pub fn n_flops(&self) -> usize {
        let dim = 1usize << self.n_qubits;
        2 * self.n_inputs * dim
            + self.n_layers * 2 * dim * dim
            + 2 * dim * self.hidden
            + self.hidden
            + 2 * self.hidden * self.n_outputs
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.hidden == 0 || self.n_outputs == 0 {
            return Err(Error::Config("QDNN widths must be positive".into()));
        }
        CircuitParams::zeros(self.n_qubits, 0, self.entangle_range).map(|_| ())
    }

    fn split<'a>(&self, params: &'a [f64]) -> Result<(&'a [f64], &'a [f64], &'a [f64])> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!("expected {} QDNN parameters, got {}", self.n_params(), params.len())));
        }
        let (pre, rest) = params.split_at(self.pre_len());
        let (ang, head) = rest.split_at(self.n_angles());
        Ok((pre, ang, head))
    }

    fn pre_map(&self, pre: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_inputs {
            return Err(Error::Shape(format!("expected {} inputs, got {}", self.n_inputs, x.len())));
        }
        let (w, b) = pre.split_at(self.n_qubits * self.n_inputs);
        Ok((0..self.n_qubits)
            .map(|q| {
                b[q] + w[q * self.n_inputs..(q + 1) * self.n_inputs].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect())
    }

    fn circuit(&self, angles: &[f64]) -> Result<CircuitParams> {
        CircuitParams::new(self.n_qubits, self.n_layers, angles.to_vec(), self.entangle_range)
    }
}

pub fn qdnn_forward(spec: &QdnnSpec, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let (pre, ang, head) = spec.split(params)?;
    let a = spec.pre_map(pre, x)?;
    let z = run_circuit(&a, &spec.circuit(ang)?)?.z;
    mlp_forward(&spec.head(), head, &z)
}

/// Forward pass plus vector-Jacobian product; `grad` receives
/// d(out . dout)/d params. Returns the forward output.
pub fn qdnn_vjp(
    spec: &QdnnSpec,
    params: &[f64],
    x: &[f64],
    dout: &[f64],
    grad: &mut [f64],
    method: QuantumGradient,
) -> Result<Vec<f64>> {
    let (pre, ang, head) = spec.split(params)?;
    if grad.len() != params.len() || dout.len() != spec.n_outputs {
        return Err(Error::Shape("gradient buffer or cotangent has wrong length".into()));
    }
    let a = spec.pre_map(pre, x)?;
    let circuit = spec.circuit(ang)?;
    let head_spec = spec.head();
    let (g_pre, rest) = grad.split_at_mut(spec.pre_len());
    let (g_ang, g_head) = rest.split_at_mut(spec.n_angles());

    let z = run_circuit(&a, &circuit)?.z;
    let (out, tape) = mlp_forward_tape(&head_spec, head, &z)?;
    let dz = mlp_backward(&head_spec, head, &tape, dout, g_head);
    let da: Vec<f64> = match method {
        QuantumGradient::Adjoint => {
            let adj = adjoint_vjp(&a, &circuit, &dz)?;
            for (g, d) in g_ang.iter_mut().zip(&adj.d_thetas) {
                *g += d;
            }
            adj.d_features
        }
        QuantumGradient::ParameterShift => {
            let jac = parameter_shift_jacobian(&a, &circuit)?;
            for (g, row) in g_ang.iter_mut().zip(&jac) {
                *g += row.iter().zip(&dz).map(|(j, d)| j * d).sum::<f64>();
            }
            let fj = feature_jacobian(&a, &circuit)?;
            fj.iter().map(|row| row.iter().zip(&dz).map(|(j, d)| j * d).sum()).collect()
        }
    };

    let (gw, gb) = g_pre.split_at_mut(spec.n_qubits * spec.n_inputs);
    for q in 0..spec.n_qubits {
        gb[q] += da[q];
        for i in 0..spec.n_inputs {
            gw[q * spec.n_inputs + i] += da[q] * x[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_counts() {
        let s = QdnnSpec::new(8, EntanglerRange::Cyclic);
        assert_eq!(s.n_params(), 876);
        assert_eq!(s.n_angles(), 144);
        assert_eq!(s.n_flops(), 74688);
    }

    #[test]
    fn zero_depth_zero_pre_feeds_ones_to_head() {
        let s = QdnnSpec::new(0, EntanglerRange::Fixed(1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = vec![0.0; s.n_params()];
        for v in p[s.pre_len()..].iter_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
        let out = qdnn_forward(&s, &p, &[0.3, 2.2, -0.2]).unwrap();
        let head = mlp_forward(&s.head(), &p[s.pre_len()..], &[1.0; 6]).unwrap();
        assert_eq!(out, head);
    }

    #[test]
    fn gradient_methods_agree_with_finite_differences() {
        let s = QdnnSpec::new(3, EntanglerRange::Fixed(2));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p: Vec<f64> = (0..s.n_params()).map(|_| rng.random_range(-0.8..0.8)).collect();
        let x = [0.35, 2.4, -0.25];
        let w = [0.3, -1.0, 0.5, 2.0];
        let f = |p: &[f64]| -> f64 { qdnn_forward(&s, p, &x).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum() };
        let mut g_ps = vec![0.0; p.len()];
        let mut g_adj = vec![0.0; p.len()];
        qdnn_vjp(&s, &p, &x, &w, &mut g_ps, QuantumGradient::ParameterShift).unwrap();
        qdnn_vjp(&s, &p, &x, &w, &mut g_adj, QuantumGradient::Adjoint).unwrap();
        let h = 1e-6;
        for k in 0..p.len() {
            let mut pp = p.clone();
            pp[k] += h;
            let mut pm = p.clone();
            pm[k] -= h;
            let fd = (f(&pp) - f(&pm)) / (2.0 * h);
            let tol = 1e-5 * fd.abs().max(1e-3);
            assert!((g_ps[k] - fd).abs() < tol, "k={k}: {} vs {fd}", g_ps[k]);
            assert!((g_adj[k] - g_ps[k]).abs() < 1e-10);
        }
    }
}
