//! Exact statevector simulation of the four-qubit adapter circuit.
//!
//! Qubit `q` (1-based) is bit `q - 1` of the basis index, so qubit 1 is the
//! least-significant bit. Expectations are exact; there is no shot sampling.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_QUBITS: usize = 4;
pub const DIM: usize = 1 << NUM_QUBITS;

/// Trainable angles per repetition: two entangling RY layers plus the final RY layer.
pub const PARAMS_PER_REPETITION: usize = 3 * NUM_QUBITS;

const CZ_PAIRS: [(usize, usize); 4] = [(1, 2), (3, 4), (2, 3), (4, 1)];
const CNOT_CHAIN: [(usize, usize); 3] = [(1, 2), (2, 3), (3, 4)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entangler {
    Cz,
    Cnot,
}

/// How raw bottleneck activations become RX angles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Activations are used as angles unchanged.
    #[default]
    Raw,
    /// `pi * tanh(x)`.
    TanhPi,
}

impl Encoding {
    pub fn angle(self, x: f64) -> f64 {
        match self {
            Encoding::Raw => x,
            Encoding::TanhPi => PI * x.tanh(),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Encoding::Raw => 1.0,
            Encoding::TanhPi => {
                let t = x.tanh();
                PI * (1.0 - t * t)
            }
        }
    }
}

/// Named circuit depths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum QnnPreset {
    /// One block: 12 trainable angles.
    #[serde(rename = "paper-literal")]
    PaperLiteral,
    /// Two blocks: 24 trainable angles.
    #[default]
    #[serde(rename = "table3")]
    Table3,
}

impl QnnPreset {
    pub fn repetitions(self) -> usize {
        match self {
            QnnPreset::PaperLiteral => 1,
            QnnPreset::Table3 => 2,
        }
    }
}

/// The circuit after RX encoding is `repetitions` copies of
/// `[RY, CZ(1,2) CZ(3,4) CZ(2,3) CZ(4,1)] x 2, RY, CNOT 1->2->3->4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    pub repetitions: usize,
    #[serde(default)]
    pub encoding: Encoding,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        CircuitSpec::from_preset(QnnPreset::default(), Encoding::Raw)
    }
}

impl CircuitSpec {
    pub fn from_preset(preset: QnnPreset, encoding: Encoding) -> Self {
        CircuitSpec {
            repetitions: preset.repetitions(),
            encoding,
        }
    }

    pub fn num_params(&self) -> usize {
        self.repetitions * PARAMS_PER_REPETITION
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("circuit needs at least one repetition".into()));
        }
        if params.len() != self.num_params() {
            return Err(Error::Config(format!(
                "circuit with {} repetitions takes {} angles, got {}",
                self.repetitions,
                self.num_params(),
                params.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: [Complex64; DIM],
}

impl Default for StateVector {
    fn default() -> Self {
        StateVector::zero()
    }
}

fn qubit_bit(q: usize) -> Result<usize> {
    if (1..=NUM_QUBITS).contains(&q) {
        Ok(1 << (q - 1))
    } else {
        Err(Error::QubitIndex {
            index: q,
            num_qubits: NUM_QUBITS,
        })
    }
}

impl StateVector {
    /// `|0000>`.
    pub fn zero() -> Self {
        let mut amps = [Complex64::new(0.0, 0.0); DIM];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { amps }
    }

    pub fn basis(index: usize) -> Result<Self> {
        if index >= DIM {
            return Err(Error::InvalidInput(format!("basis index {index} >= {DIM}")));
        }
        let mut amps = [Complex64::new(0.0, 0.0); DIM];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { amps })
    }

    pub fn from_amplitudes(amps: [Complex64; DIM]) -> Self {
        StateVector { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64; DIM] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn rotate(&mut self, axis: Axis, qubit: usize, theta: f64) -> Result<()> {
        let bit = qubit_bit(qubit)?;
        self.rotate_bit(axis, bit, theta);
        Ok(())
    }

    fn rotate_bit(&mut self, axis: Axis, bit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        for i in 0..DIM {
            if i & bit != 0 {
                continue;
            }
            let a0 = self.amps[i];
            let a1 = self.amps[i | bit];
            let (n0, n1) = match axis {
                // [[c, -i s], [-i s, c]]
                Axis::X => (
                    Complex64::new(c * a0.re + s * a1.im, c * a0.im - s * a1.re),
                    Complex64::new(s * a0.im + c * a1.re, -s * a0.re + c * a1.im),
                ),
                // [[c, -s], [s, c]]
                Axis::Y => (a0 * c - a1 * s, a0 * s + a1 * c),
            };
            self.amps[i] = n0;
            self.amps[i | bit] = n1;
        }
    }

    pub fn entangle(&mut self, kind: Entangler, a: usize, b: usize) -> Result<()> {
        let (ba, bb) = (qubit_bit(a)?, qubit_bit(b)?);
        if a == b {
            return Err(Error::InvalidPair(a));
        }
        self.entangle_bits(kind, ba, bb);
        Ok(())
    }

    fn entangle_bits(&mut self, kind: Entangler, ba: usize, bb: usize) {
        match kind {
            Entangler::Cz => {
                for i in 0..DIM {
                    if i & ba != 0 && i & bb != 0 {
                        self.amps[i] = -self.amps[i];
                    }
                }
            }
            // `a` is the control, `b` the target.
            Entangler::Cnot => {
                for i in 0..DIM {
                    if i & ba != 0 && i & bb == 0 {
                        self.amps.swap(i, i | bb);
                    }
                }
            }
        }
    }

    /// `<Z_q>` for each qubit, qubit 1 first.
    pub fn z_expectations(&self) -> [f64; NUM_QUBITS] {
        let mut out = [0.0; NUM_QUBITS];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if i & (1 << q) == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        out
    }
}

pub fn apply_rotation(mut state: StateVector, axis: Axis, qubit: usize, theta: f64) -> Result<StateVector> {
    state.rotate(axis, qubit, theta)?;
    Ok(state)
}

pub fn apply_entangler(mut state: StateVector, kind: Entangler, a: usize, b: usize) -> Result<StateVector> {
    state.entangle(kind, a, b)?;
    Ok(state)
}

/// Pauli-Z readout per qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QnnOutput {
    pub expectations: [f64; NUM_QUBITS],
}

/// Runs the circuit on already-encoded RX angles.
fn simulate(angles: &[f64; NUM_QUBITS], params: &[f64], repetitions: usize) -> [f64; NUM_QUBITS] {
    let mut state = StateVector::zero();
    for (q, &theta) in angles.iter().enumerate() {
        state.rotate_bit(Axis::X, 1 << q, theta);
    }
    let mut p = params.iter();
    let mut ry_layer = |state: &mut StateVector| {
        for q in 0..NUM_QUBITS {
            state.rotate_bit(Axis::Y, 1 << q, *p.next().expect("angle count checked"));
        }
    };
    for _ in 0..repetitions {
        for _ in 0..2 {
            ry_layer(&mut state);
            for (a, b) in CZ_PAIRS {
                state.entangle_bits(Entangler::Cz, 1 << (a - 1), 1 << (b - 1));
            }
        }
        ry_layer(&mut state);
        for (a, b) in CNOT_CHAIN {
            state.entangle_bits(Entangler::Cnot, 1 << (a - 1), 1 << (b - 1));
        }
    }
    state.z_expectations()
}

fn encode(inputs: &[f64], spec: &CircuitSpec) -> Result<[f64; NUM_QUBITS]> {
    let arr: [f64; NUM_QUBITS] = inputs
        .try_into()
        .map_err(|_| Error::Config(format!("circuit takes {NUM_QUBITS} inputs, got {}", inputs.len())))?;
    Ok(arr.map(|x| spec.encoding.angle(x)))
}

pub fn run_qnn(inputs: &[f64], params: &[f64], spec: &CircuitSpec) -> Result<QnnOutput> {
    spec.check(params)?;
    let angles = encode(inputs, spec)?;
    Ok(QnnOutput {
        expectations: simulate(&angles, params, spec.repetitions),
    })
}

/// Jacobians of the four expectations. `inputs[j][i]` is `d<Z_i>/d input_j`
/// (through the encoding), `params[p][i]` is `d<Z_i>/d param_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct QnnGradients {
    pub inputs: [[f64; NUM_QUBITS]; NUM_QUBITS],
    pub params: Vec<[f64; NUM_QUBITS]>,
}

fn shifted_difference(mut eval: impl FnMut(f64) -> [f64; NUM_QUBITS]) -> [f64; NUM_QUBITS] {
    let plus = eval(FRAC_PI_2);
    let minus = eval(-FRAC_PI_2);
    std::array::from_fn(|i| 0.5 * (plus[i] - minus[i]))
}

/// Parameter-shift gradients: two circuit runs per angle at `theta +- pi/2`.
pub fn param_shift_grad(inputs: &[f64], params: &[f64], spec: &CircuitSpec) -> Result<QnnGradients> {
    param_shift_partial(inputs, params, spec, true, true)
}

/// As [`param_shift_grad`], skipping whichever Jacobian is not wanted.
/// Skipped Jacobians come back zero.
pub(crate) fn param_shift_partial(
    inputs: &[f64],
    params: &[f64],
    spec: &CircuitSpec,
    want_inputs: bool,
    want_params: bool,
) -> Result<QnnGradients> {
    spec.check(params)?;
    let angles = encode(inputs, spec)?;
    let reps = spec.repetitions;

    let mut grads = QnnGradients {
        inputs: [[0.0; NUM_QUBITS]; NUM_QUBITS],
        params: vec![[0.0; NUM_QUBITS]; params.len()],
    };

    if want_inputs {
        for j in 0..NUM_QUBITS {
            let d = shifted_difference(|shift| {
                let mut a = angles;
                a[j] += shift;
                simulate(&a, params, reps)
            });
            let chain = spec.encoding.derivative(inputs[j]);
            grads.inputs[j] = d.map(|v| v * chain);
        }
    }
    if want_params {
        let mut shifted = params.to_vec();
        for p in 0..params.len() {
            grads.params[p] = shifted_difference(|shift| {
                shifted[p] = params[p] + shift;
                simulate(&angles, &shifted, reps)
            });
            shifted[p] = params[p];
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_state(s: &StateVector, want: &[(usize, Complex64)]) {
        for i in 0..DIM {
            let w = want.iter().find(|(j, _)| *j == i).map(|p| p.1).unwrap_or_default();
            assert!((s.amps[i] - w).norm() < 1e-15, "amp {i}: {} vs {w}", s.amps[i]);
        }
    }

    #[test]
    fn zero_rotation_is_identity() {
        let mut s = StateVector::zero();
        s.rotate(Axis::Y, 2, 0.7).unwrap();
        s.rotate(Axis::X, 3, -1.1).unwrap();
        let before = s.clone();
        s.rotate(Axis::X, 1, 0.0).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn ry_pi_flips_to_one() {
        let s = apply_rotation(StateVector::zero(), Axis::Y, 1, PI).unwrap();
        assert_state(&s, &[(1, c(1.0, 0.0))]);
    }

    #[test]
    fn rx_half_pi() {
        let s = apply_rotation(StateVector::zero(), Axis::X, 1, FRAC_PI_2).unwrap();
        assert_state(&s, &[(0, c(FRAC_1_SQRT_2, 0.0)), (1, c(0.0, -FRAC_1_SQRT_2))]);
    }

    #[test]
    fn cz_flips_only_11() {
        let s = apply_entangler(StateVector::basis(0b0011).unwrap(), Entangler::Cz, 1, 2).unwrap();
        assert_state(&s, &[(0b0011, c(-1.0, 0.0))]);
        let s = apply_entangler(StateVector::zero(), Entangler::Cz, 1, 2).unwrap();
        assert_state(&s, &[(0, c(1.0, 0.0))]);
    }

    #[test]
    fn cnot_truth_table() {
        // control qubit 1 set, target qubit 2 clear
        let s = apply_entangler(StateVector::basis(0b0001).unwrap(), Entangler::Cnot, 1, 2).unwrap();
        assert_state(&s, &[(0b0011, c(1.0, 0.0))]);
        let s = apply_entangler(StateVector::basis(0b0010).unwrap(), Entangler::Cnot, 1, 2).unwrap();
        assert_state(&s, &[(0b0010, c(1.0, 0.0))]);
    }

    #[test]
    fn bad_indices() {
        let s = StateVector::zero();
        assert!(matches!(
            apply_rotation(s.clone(), Axis::X, 0, 1.0),
            Err(Error::QubitIndex { index: 0, .. })
        ));
        assert!(matches!(
            apply_rotation(s.clone(), Axis::X, 5, 1.0),
            Err(Error::QubitIndex { index: 5, .. })
        ));
        assert!(matches!(
            apply_entangler(s, Entangler::Cz, 2, 2),
            Err(Error::InvalidPair(2))
        ));
    }

    #[test]
    fn trivial_circuit_reads_all_ones() {
        let spec = CircuitSpec::default();
        let out = run_qnn(&[0.0; 4], &vec![0.0; spec.num_params()], &spec).unwrap();
        assert_eq!(out.expectations, [1.0; 4]);
    }

    #[test]
    fn preset_param_counts() {
        assert_eq!(
            CircuitSpec::from_preset(QnnPreset::Table3, Encoding::Raw).num_params(),
            24
        );
        assert_eq!(
            CircuitSpec::from_preset(QnnPreset::PaperLiteral, Encoding::Raw).num_params(),
            12
        );
    }

    #[test]
    fn param_count_mismatch_is_config_error() {
        let spec = CircuitSpec::default();
        assert!(matches!(run_qnn(&[0.0; 4], &[0.0; 12], &spec), Err(Error::Config(_))));
        assert!(matches!(run_qnn(&[0.0; 3], &[0.0; 24], &spec), Err(Error::Config(_))));
        assert!(matches!(
            param_shift_grad(&[0.0; 4], &[0.0; 5], &spec),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn gradients_vanish_at_origin() {
        let spec = CircuitSpec::default();
        let g = param_shift_grad(&[0.0; 4], &[0.0; 24], &spec).unwrap();
        for row in g.inputs.iter().chain(&g.params) {
            for v in row {
                assert!(v.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_ry_shift_rule() {
        // One RY on qubit 1: <Z> = cos(theta); d/dtheta at pi/2 is -1.
        let z = |theta: f64| {
            let s = apply_rotation(StateVector::zero(), Axis::Y, 1, theta).unwrap();
            s.z_expectations()[0]
        };
        let theta = FRAC_PI_2;
        let g = 0.5 * (z(theta + FRAC_PI_2) - z(theta - FRAC_PI_2));
        assert!((g + 1.0).abs() < 1e-15);
    }

    #[test]
    fn preset_serializes_by_name() {
        assert_eq!(serde_json::to_string(&QnnPreset::Table3).unwrap(), "\"table3\"");
        let p: QnnPreset = serde_json::from_str("\"paper-literal\"").unwrap();
        assert_eq!(p, QnnPreset::PaperLiteral);
        let spec: CircuitSpec = serde_json::from_str(r#"{"repetitions":2,"encoding":"tanh_pi"}"#).unwrap();
        assert_eq!(spec.encoding, Encoding::TanhPi);
    }
}
