use serde::{Deserialize, Serialize};

use super::QuantumState;
use crate::{Error, Result};

/// CNOT ring offset policy for strongly entangling layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "range")]
pub enum EntanglerRange {
    /// Same offset in every layer.
    Fixed(usize),
    /// Offset (l mod (n-1)) + 1 in layer l.
    Cyclic,
}

impl Default for EntanglerRange {
    fn default() -> Self {
        Self::Fixed(1)
    }
}

impl EntanglerRange {
    pub fn for_layer(&self, layer: usize, n_qubits: usize) -> usize {
        match *self {
            Self::Fixed(r) => r,
            Self::Cyclic if n_qubits > 1 => layer % (n_qubits - 1) + 1,
            Self::Cyclic => 1,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if let Self::Fixed(r) = *self {
            if r == 0 || (n_qubits > 1 && r >= n_qubits) {
                return Err(Error::Config(format!(
                    "entangle range {r} outside [1, {}]",
                    n_qubits.saturating_sub(1).max(1)
                )));
            }
        }
        Ok(())
    }
}

/// Rotation angles for L strongly entangling layers on n qubits, stored
/// flat with index `(layer * n + qubit) * 3 + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub thetas: Vec<f64>,
    pub entangle_range: EntanglerRange,
}

impl CircuitParams {
    pub fn new(n_qubits: usize, n_layers: usize, thetas: Vec<f64>, entangle_range: EntanglerRange) -> Result<Self> {
        let p = Self { n_qubits, n_layers, thetas, entangle_range };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(n_qubits: usize, n_layers: usize, entangle_range: EntanglerRange) -> Result<Self> {
        Self::new(n_qubits, n_layers, vec![0.0; n_layers * n_qubits * 3], entangle_range)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > super::MAX_QUBITS {
            return Err(Error::Shape(format!("qubit count {} unsupported", self.n_qubits)));
        }
        let want = self.n_layers * self.n_qubits * 3;
        if self.thetas.len() != want {
            return Err(Error::Shape(format!(
                "expected {want} angles for {}x{}x3, got {}",
                self.n_layers,
                self.n_qubits,
                self.thetas.len()
            )));
        }
        self.entangle_range.validate(self.n_qubits)
    }

    pub fn n_angles(&self) -> usize {
        self.thetas.len()
    }

    pub fn layer(&self, l: usize) -> &[f64] {
        let w = self.n_qubits * 3;
        &self.thetas[l * w..(l + 1) * w]
    }
}

/// Pauli-Z expectation values, one per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct ZExpectations {
    pub z: Vec<f64>,
}

/// RY(feature_j) on qubit j of |0...0>.
pub fn angle_embed(features: &[f64]) -> Result<QuantumState> {
    if features.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("embedding feature".into()));
    }
    let mut s = QuantumState::zero(features.len())?;
    for (q, &f) in features.iter().enumerate() {
        s.apply_ry(q, f);
    }
    Ok(s)
}

/// One strongly entangling layer: Rot on each qubit, then the CNOT ring
/// q -> (q + r) mod n.
pub fn apply_sel_layer(state: &mut QuantumState, layer_thetas: &[f64], range: usize) -> Result<()> {
    let n = state.n_qubits();
    if layer_thetas.len() != n * 3 {
        return Err(Error::Shape(format!("layer expects {} angles, got {}", n * 3, layer_thetas.len())));
    }
    for q in 0..n {
        let a = &layer_thetas[q * 3..q * 3 + 3];
        state.apply_rot(q, [a[0], a[1], a[2]]);
    }
    apply_entangler(state, range);
    Ok(())
}

pub(crate) fn apply_entangler(state: &mut QuantumState, range: usize) {
    let n = state.n_qubits();
    if n < 2 {
        return;
    }
    for q in 0..n {
        state.apply_cnot(q, (q + range) % n);
    }
}

pub(crate) fn undo_entangler(state: &mut QuantumState, range: usize) {
    let n = state.n_qubits();
    if n < 2 {
        return;
    }
    for q in (0..n).rev() {
        state.apply_cnot(q, (q + range) % n);
    }
}

/// Applies layers `layers` of `params` to an existing state.
pub fn apply_layers(state: &mut QuantumState, params: &CircuitParams, layers: std::ops::Range<usize>) -> Result<()> {
    if state.n_qubits() != params.n_qubits {
        return Err(Error::Shape(format!("state has {} qubits, params {}", state.n_qubits(), params.n_qubits)));
    }
    if layers.end > params.n_layers {
        return Err(Error::Index { index: layers.end, len: params.n_layers });
    }
    for l in layers {
        let r = params.entangle_range.for_layer(l, params.n_qubits);
        apply_sel_layer(state, params.layer(l), r)?;
    }
    Ok(())
}

pub fn final_state(features: &[f64], params: &CircuitParams) -> Result<QuantumState> {
    params.validate()?;
    if features.len() != params.n_qubits {
        return Err(Error::Shape(format!("{} features for {} qubits", features.len(), params.n_qubits)));
    }
    let mut s = angle_embed(features)?;
    apply_layers(&mut s, params, 0..params.n_layers)?;
    Ok(s)
}

pub fn run_circuit(features: &[f64], params: &CircuitParams) -> Result<ZExpectations> {
    Ok(ZExpectations { z: final_state(features, params)?.z_expectations() })
}
