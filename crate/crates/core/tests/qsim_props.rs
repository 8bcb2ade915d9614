use std::f64::consts::PI;

use num_complex::Complex64;
use phaselab_core::oracle;
use phaselab_core::qsim::{
    apply_entangler, apply_rotation, param_shift_grad, run_qnn, Axis, CircuitSpec, Encoding, Entangler, QnnPreset,
    StateVector, DIM, NUM_QUBITS,
};
use phaselab_core::Error;
use proptest::prelude::*;
use proptest::strategy::ValueTree;

#[derive(Clone, Debug)]
enum Gate {
    Rot(Axis, usize, f64),
    Ent(Entangler, usize, usize),
}

fn gate() -> impl Strategy<Value = Gate> {
    let q = 1..=NUM_QUBITS;
    prop_oneof![
        (q.clone(), -PI..PI).prop_map(|(q, t)| Gate::Rot(Axis::X, q, t)),
        (q.clone(), -PI..PI).prop_map(|(q, t)| Gate::Rot(Axis::Y, q, t)),
        (q.clone(), 1..NUM_QUBITS).prop_map(|(a, k)| Gate::Ent(Entangler::Cz, a, (a - 1 + k) % NUM_QUBITS + 1)),
        (q, 1..NUM_QUBITS).prop_map(|(a, k)| Gate::Ent(Entangler::Cnot, a, (a - 1 + k) % NUM_QUBITS + 1)),
    ]
}

fn apply(state: StateVector, g: &Gate) -> StateVector {
    match *g {
        Gate::Rot(axis, q, t) => apply_rotation(state, axis, q, t).unwrap(),
        Gate::Ent(kind, a, b) => apply_entangler(state, kind, a, b).unwrap(),
    }
}

fn dense(g: &Gate) -> oracle::Dense {
    match *g {
        Gate::Rot(axis, q, t) => oracle::dense_rotation(axis, q, t),
        Gate::Ent(kind, a, b) => oracle::dense_entangler(kind, a, b),
    }
}

fn max_diff_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn spec_strategy() -> impl Strategy<Value = CircuitSpec> {
    (
        prop_oneof![Just(QnnPreset::PaperLiteral), Just(QnnPreset::Table3)],
        prop_oneof![Just(Encoding::Raw), Just(Encoding::TanhPi)],
    )
        .prop_map(|(p, e)| CircuitSpec::from_preset(p, e))
}

fn circuit_case() -> impl Strategy<Value = (CircuitSpec, [f64; NUM_QUBITS], Vec<f64>)> {
    spec_strategy().prop_flat_map(|spec| {
        (
            Just(spec),
            prop::array::uniform4(-PI..PI),
            prop::collection::vec(-PI..PI, spec.num_params()),
        )
    })
}

#[test]
fn norm_survives_ten_thousand_gates() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let gates = prop::collection::vec(gate(), 10_000)
        .new_tree(&mut runner)
        .unwrap()
        .current();
    let mut state = StateVector::zero();
    for g in &gates {
        state = apply(state, g);
        assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn gates_preserve_norm(gates in prop::collection::vec(gate(), 1..200)) {
        let mut state = StateVector::zero();
        for g in &gates {
            state = apply(state, g);
            prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotations_reverse_and_entanglers_self_invert(prefix in prop::collection::vec(gate(), 0..20), g in gate()) {
        let mut state = StateVector::zero();
        for p in &prefix {
            state = apply(state, p);
        }
        let start = *state.amplitudes();
        let inverse = match g {
            Gate::Rot(axis, q, t) => Gate::Rot(axis, q, -t),
            ref e => e.clone(),
        };
        let back = apply(apply(state, &g), &inverse);
        prop_assert!(max_diff_c(back.amplitudes(), &start) < 1e-12);
    }

    #[test]
    fn single_gates_match_dense_matrices(prefix in prop::collection::vec(gate(), 0..10), g in gate()) {
        let mut state = StateVector::zero();
        for p in &prefix {
            state = apply(state, p);
        }
        let expect = oracle::dense_apply(&dense(&g), state.amplitudes());
        let got = apply(state, &g);
        prop_assert!(max_diff_c(got.amplitudes(), &expect) < 1e-12);
    }

    #[test]
    fn circuit_matches_dense_oracle((spec, inputs, params) in circuit_case()) {
        let fast = run_qnn(&inputs, &params, &spec).unwrap().expectations;
        let slow = oracle::dense_circuit(&inputs, &params, &spec);
        for q in 0..NUM_QUBITS {
            prop_assert!((fast[q] - slow[q]).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&fast[q]));
        }
    }

    #[test]
    fn parameter_shift_matches_finite_differences((spec, inputs, params) in circuit_case()) {
        let g = param_shift_grad(&inputs, &params, &spec).unwrap();
        for q in 0..NUM_QUBITS {
            let fd = oracle::central_difference(|p| run_qnn(&inputs, p, &spec).unwrap().expectations[q], &params, 1e-6);
            for (p, v) in fd.iter().enumerate() {
                prop_assert!((g.params[p][q] - v).abs() < 1e-6, "param {p} qubit {q}");
            }
            let fd_in = oracle::central_difference(|x| run_qnn(x, &params, &spec).unwrap().expectations[q], &inputs, 1e-6);
            for (j, v) in fd_in.iter().enumerate() {
                prop_assert!((g.inputs[j][q] - v).abs() < 1e-6, "input {j} qubit {q}");
            }
        }
    }
}

#[test]
fn dense_unitary_is_unitary() {
    let spec = CircuitSpec::from_preset(QnnPreset::Table3, Encoding::Raw);
    let params: Vec<f64> = (0..spec.num_params()).map(|i| 0.3 * i as f64).collect();
    let u = oracle::dense_circuit_unitary(&[0.1, 0.2, 0.3, 0.4], &params, spec.repetitions);
    for i in 0..DIM {
        for j in 0..DIM {
            let ip: Complex64 = (0..DIM).map(|k| u[k * DIM + i].conj() * u[k * DIM + j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((ip - Complex64::new(want, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn pi_on_first_qubit_matches_dense_oracle() {
    let spec = CircuitSpec::from_preset(QnnPreset::PaperLiteral, Encoding::Raw);
    let params = vec![0.0; spec.num_params()];
    let inputs = [PI, 0.0, 0.0, 0.0];
    let fast = run_qnn(&inputs, &params, &spec).unwrap().expectations;
    let slow = oracle::dense_circuit(&inputs, &params, &spec);
    for q in 0..NUM_QUBITS {
        assert!((fast[q] - slow[q]).abs() < 1e-12);
    }
}

#[test]
fn parameter_count_mismatch_is_config_error() {
    let spec = CircuitSpec::from_preset(QnnPreset::Table3, Encoding::Raw);
    assert!(matches!(run_qnn(&[0.0; 4], &[0.0; 12], &spec), Err(Error::Config(_))));
    assert!(matches!(
        param_shift_grad(&[0.0; 4], &[0.0; 25], &spec),
        Err(Error::Config(_))
    ));
}
