use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use super::circuit::{angle_embed, apply_layers, final_state, undo_entangler};
use super::{CircuitParams, Pauli, QuantumState};
use crate::{Error, Result};

/// Method used for circuit derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumGradient {
    /// Two shifted circuit runs per angle.
    #[default]
    ParameterShift,
    /// One forward and one backward sweep for a vector-Jacobian product.
    Adjoint,
}

fn shifted_z(features: &[f64], params: &CircuitParams, k: usize, delta: f64) -> Result<Vec<f64>> {
    let mut p = params.clone();
    p.thetas[k] += delta;
    Ok(final_state(features, &p)?.z_expectations())
}

/// d z / d theta_k by the two-term shift rule.
pub fn parameter_shift_grad(features: &[f64], params: &CircuitParams, k: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if k >= params.n_angles() {
        return Err(Error::Index { index: k, len: params.n_angles() });
    }
    let plus = shifted_z(features, params, k, FRAC_PI_2)?;
    let minus = shifted_z(features, params, k, -FRAC_PI_2)?;
    Ok(plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a - b)).collect())
}

/// Full Jacobian `jac[k][j] = d z_j / d theta_k`.
///
/// Shifted runs start from the cached state in front of the shifted
/// layer; each row is computed independently so the result does not
/// depend on how rayon schedules it.
pub fn parameter_shift_jacobian(features: &[f64], params: &CircuitParams) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let mut prefix = Vec::with_capacity(params.n_layers + 1);
    let mut s = angle_embed(features)?;
    if s.n_qubits() != params.n_qubits {
        return Err(Error::Shape(format!("{} features for {} qubits", features.len(), params.n_qubits)));
    }
    prefix.push(s.clone());
    for l in 0..params.n_layers {
        apply_layers(&mut s, params, l..l + 1)?;
        prefix.push(s.clone());
    }
    let per_layer = params.n_qubits * 3;
    (0..params.n_angles())
        .into_par_iter()
        .map(|k| {
            let l = k / per_layer;
            let run = |delta: f64| -> Result<Vec<f64>> {
                let mut p = params.clone();
                p.thetas[k] += delta;
                let mut st = prefix[l].clone();
                apply_layers(&mut st, &p, l..params.n_layers)?;
                Ok(st.z_expectations())
            };
            let plus = run(FRAC_PI_2)?;
            let minus = run(-FRAC_PI_2)?;
            Ok(plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a - b)).collect())
        })
        .collect()
}

/// `jac[j][i] = d z_i / d feature_j`, by the shift rule on the embedding
/// rotations.
pub fn feature_jacobian(features: &[f64], params: &CircuitParams) -> Result<Vec<Vec<f64>>> {
    (0..features.len())
        .map(|j| {
            let mut f = features.to_vec();
            f[j] += FRAC_PI_2;
            let plus = final_state(&f, params)?.z_expectations();
            f[j] = features[j] - FRAC_PI_2;
            let minus = final_state(&f, params)?.z_expectations();
            Ok(plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a - b)).collect())
        })
        .collect()
}

/// Result of an adjoint sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointResult {
    pub z: Vec<f64>,
    /// d (sum_j w_j z_j) / d theta
    pub d_thetas: Vec<f64>,
    /// d (sum_j w_j z_j) / d feature
    pub d_features: Vec<f64>,
}

/// Vector-Jacobian product of the z readout with weights `cotangent`,
/// exact to rounding.
///
/// Every parametrised gate is exp(-i theta P / 2), so the derivative of
/// <O> is Im <lambda| P |psi> evaluated just after the gate, with lambda
/// the back-propagated O|psi_final>.
pub fn adjoint_vjp(features: &[f64], params: &CircuitParams, cotangent: &[f64]) -> Result<AdjointResult> {
    let n = params.n_qubits;
    if cotangent.len() != n {
        return Err(Error::Shape(format!("cotangent of length {} for {n} qubits", cotangent.len())));
    }
    let mut psi = final_state(features, params)?;
    let z = psi.z_expectations();
    let mut lam = psi.clone();
    lam.apply_weighted_z(cotangent);

    let mut d_thetas = vec![0.0; params.n_angles()];
    let mut d_features = vec![0.0; n];
    let step = |psi: &mut QuantumState, lam: &mut QuantumState, q: usize, p: Pauli, theta: f64| {
        let g = lam.pauli_overlap(psi, q, p).im;
        match p {
            Pauli::Y => {
                psi.apply_ry(q, -theta);
                lam.apply_ry(q, -theta);
            }
            Pauli::Z => {
                psi.apply_rz(q, -theta);
                lam.apply_rz(q, -theta);
            }
        }
        g
    };

    for l in (0..params.n_layers).rev() {
        let r = params.entangle_range.for_layer(l, n);
        undo_entangler(&mut psi, r);
        undo_entangler(&mut lam, r);
        for q in (0..n).rev() {
            let base = (l * n + q) * 3;
            let th = &params.thetas[base..base + 3];
            d_thetas[base + 2] = step(&mut psi, &mut lam, q, Pauli::Z, th[2]);
            d_thetas[base + 1] = step(&mut psi, &mut lam, q, Pauli::Y, th[1]);
            d_thetas[base] = step(&mut psi, &mut lam, q, Pauli::Z, th[0]);
        }
    }
    for q in (0..n).rev() {
        d_features[q] = step(&mut psi, &mut lam, q, Pauli::Y, features[q]);
    }
    Ok(AdjointResult { z, d_thetas, d_features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{run_circuit, EntanglerRange};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_params(rng: &mut ChaCha8Rng, n: usize, l: usize) -> CircuitParams {
        let th = (0..n * l * 3).map(|_| rng.random_range(-PI..PI)).collect();
        CircuitParams::new(n, l, th, EntanglerRange::Cyclic).unwrap()
    }

    #[test]
    fn single_ry_gradient() {
        // RY(theta) on |0>: embed with feature 0 and put theta in the
        // middle slot of one Rot.
        for (theta, want) in [(0.0, 0.0), (PI / 2.0, -1.0)] {
            let p = CircuitParams::new(1, 1, vec![0.0, theta, 0.0], EntanglerRange::Fixed(1)).unwrap();
            let g = parameter_shift_grad(&[0.0], &p, 1).unwrap();
            assert!((g[0] - want).abs() < 1e-15);
        }
        let p = CircuitParams::zeros(1, 1, EntanglerRange::Fixed(1)).unwrap();
        assert!(matches!(parameter_shift_grad(&[0.0], &p, 3), Err(Error::Index { .. })));
    }

    #[test]
    fn jacobian_matches_single_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(&mut rng, 4, 3);
        let f = [0.1, 0.7, -0.3, 1.9];
        let jac = parameter_shift_jacobian(&f, &p).unwrap();
        for k in 0..p.n_angles() {
            let g = parameter_shift_grad(&f, &p, k).unwrap();
            for j in 0..4 {
                assert!((jac[k][j] - g[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn adjoint_matches_parameter_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = rng.random_range(1..=5);
            let l = rng.random_range(0..=4);
            let p = random_params(&mut rng, n, l);
            let f: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let adj = adjoint_vjp(&f, &p, &w).unwrap();
            let jac = parameter_shift_jacobian(&f, &p).unwrap();
            for k in 0..p.n_angles() {
                let want: f64 = jac[k].iter().zip(&w).map(|(a, b)| a * b).sum();
                assert!((adj.d_thetas[k] - want).abs() < 1e-10);
            }
            let fj = feature_jacobian(&f, &p).unwrap();
            for j in 0..n {
                let want: f64 = fj[j].iter().zip(&w).map(|(a, b)| a * b).sum();
                assert!((adj.d_features[j] - want).abs() < 1e-10);
            }
            assert_eq!(adj.z, run_circuit(&f, &p).unwrap().z);
        }
    }
}
