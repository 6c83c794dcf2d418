use num_complex::Complex64;

use crate::{Error, Result};

/// Dense n-qubit pure state. Qubit 0 is the least significant bit of the
/// basis-state index.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// Single-qubit Pauli operators used as rotation generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    Y,
    Z,
}

pub const MAX_QUBITS: usize = 20;

impl QuantumState {
    /// |0...0>
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Shape(format!("qubit count {n_qubits} outside 1..={MAX_QUBITS}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Shape(format!("amplitude count {len} is not 2^n")));
        }
        Ok(Self { n_qubits: len.trailing_zeros() as usize, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies a 2x2 matrix `[[m00, m01], [m10, m11]]` to `qubit`.
    pub fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let bit = 1usize << qubit;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i0 in base..base + bit {
                let i1 = i0 | bit;
                let a0 = self.amps[i0];
                let a1 = self.amps[i1];
                self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i1] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += bit << 1;
        }
    }

    pub fn apply_ry(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let bit = 1usize << qubit;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i0 in base..base + bit {
                let i1 = i0 | bit;
                let a0 = self.amps[i0];
                let a1 = self.amps[i1];
                self.amps[i0] = a0 * c - a1 * s;
                self.amps[i1] = a0 * s + a1 * c;
            }
            base += bit << 1;
        }
    }

    pub fn apply_rz(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let lo = Complex64::new(c, -s);
        let hi = Complex64::new(c, s);
        let bit = 1usize << qubit;
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & bit == 0 { lo } else { hi };
        }
    }

    /// General rotation: RZ(angles[0]) first, then RY(angles[1]), then
    /// RZ(angles[2]); as a matrix RZ(a2) RY(a1) RZ(a0).
    pub fn apply_rot(&mut self, qubit: usize, angles: [f64; 3]) {
        self.apply_rz(qubit, angles[0]);
        self.apply_ry(qubit, angles[1]);
        self.apply_rz(qubit, angles[2]);
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        debug_assert_ne!(control, target);
        let cb = 1usize << control;
        let tb = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    /// Multiplies the state in place by a Pauli on `qubit`.
    pub fn apply_pauli(&mut self, qubit: usize, p: Pauli) {
        let bit = 1usize << qubit;
        match p {
            Pauli::Z => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a = -*a;
                    }
                }
            }
            Pauli::Y => {
                let i_unit = Complex64::new(0.0, 1.0);
                for i0 in 0..self.amps.len() {
                    if i0 & bit == 0 {
                        let i1 = i0 | bit;
                        let a0 = self.amps[i0];
                        let a1 = self.amps[i1];
                        self.amps[i0] = -i_unit * a1;
                        self.amps[i1] = i_unit * a0;
                    }
                }
            }
        }
    }

    /// <self| P_qubit |other>
    pub fn pauli_overlap(&self, other: &QuantumState, qubit: usize, p: Pauli) -> Complex64 {
        let bit = 1usize << qubit;
        let mut acc = Complex64::new(0.0, 0.0);
        match p {
            Pauli::Z => {
                for (i, (a, b)) in self.amps.iter().zip(&other.amps).enumerate() {
                    let v = a.conj() * b;
                    if i & bit == 0 {
                        acc += v;
                    } else {
                        acc -= v;
                    }
                }
            }
            Pauli::Y => {
                let i_unit = Complex64::new(0.0, 1.0);
                for i0 in 0..self.amps.len() {
                    if i0 & bit == 0 {
                        let i1 = i0 | bit;
                        // (Y b)[i0] = -i b[i1], (Y b)[i1] = i b[i0]
                        acc += self.amps[i0].conj() * (-i_unit * other.amps[i1]);
                        acc += self.amps[i1].conj() * (i_unit * other.amps[i0]);
                    }
                }
            }
        }
        acc
    }

    pub fn z_expectation(&self, qubit: usize) -> f64 {
        let bit = 1usize << qubit;
        self.amps.iter().enumerate().map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() }).sum()
    }

    pub fn z_expectations(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n_qubits];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, zq) in z.iter_mut().enumerate() {
                if i >> q & 1 == 0 {
                    *zq += p;
                } else {
                    *zq -= p;
                }
            }
        }
        z
    }

    /// Replaces the state by O|state> for the diagonal observable
    /// O = sum_j weights[j] Z_j.
    pub fn apply_weighted_z(&mut self, weights: &[f64]) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            let mut d = 0.0;
            for (q, w) in weights.iter().enumerate() {
                d += if i >> q & 1 == 0 { *w } else { -*w };
            }
            *a *= d;
        }
    }
}
