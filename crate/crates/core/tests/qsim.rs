use cffq::qsim::{
    adjoint_vjp, apply_sel_layer, final_state, parameter_shift_jacobian, run_circuit, CircuitParams, EntanglerRange,
    QuantumState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_circuit(rng: &mut ChaCha8Rng) -> (Vec<f64>, CircuitParams) {
    let n = rng.random_range(1..=6);
    let l = rng.random_range(1..=8);
    let thetas = (0..l * n * 3).map(|_| rng.random_range(-3.2..3.2)).collect();
    let x = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    (x, CircuitParams::new(n, l, thetas, EntanglerRange::Cyclic).unwrap())
}

#[test]
fn adjoint_equals_shift_rule_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..40 {
        let (x, p) = random_circuit(&mut rng);
        let w: Vec<f64> = (0..p.n_qubits).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jac = parameter_shift_jacobian(&x, &p).unwrap();
        let adj = adjoint_vjp(&x, &p, &w).unwrap();
        for (k, row) in jac.iter().enumerate() {
            let want: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((adj.d_thetas[k] - want).abs() < 1e-12, "angle {k}: {} vs {want}", adj.d_thetas[k]);
        }
        assert_eq!(adj.z, run_circuit(&x, &p).unwrap().z);
    }
}

#[test]
fn readout_is_bounded_and_periodic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..40 {
        let (x, p) = random_circuit(&mut rng);
        let z = final_state(&x, &p).unwrap().z_expectations();
        assert!(z.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        let mut q = p.clone();
        let k = rng.random_range(0..q.n_angles());
        q.thetas[k] += 4.0 * std::f64::consts::PI;
        let z2 = final_state(&x, &q).unwrap().z_expectations();
        for (a, b) in z.iter().zip(&z2) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn identity_layer_keeps_basis_state_populations() {
    // Zero rotations leave only the CNOT ring, a permutation of basis states.
    let mut s = QuantumState::zero(4).unwrap();
    apply_sel_layer(&mut s, &[0.0; 12], 1).unwrap();
    assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-15);
    assert_eq!(s.z_expectations(), vec![1.0; 4]);
}

#[test]
fn mismatched_shapes_are_errors() {
    let p = CircuitParams::zeros(3, 2, EntanglerRange::Fixed(1)).unwrap();
    assert!(final_state(&[0.1, 0.2], &p).is_err());
    assert!(adjoint_vjp(&[0.1, 0.2, 0.3], &p, &[1.0]).is_err());
    let mut s = QuantumState::zero(3).unwrap();
    assert!(apply_sel_layer(&mut s, &[0.0; 6], 1).is_err());
    assert!(CircuitParams::zeros(3, 2, EntanglerRange::Fixed(3)).is_err());
}
