//! Fast property battery run by `phaselab selftest`. Every check compares the
//! production code against [`crate::oracle`] on seeded random instances.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::adapters::{forward_batch, init_adapter, AdapterSpec, Backbone, HilbertAxis, Model, Variant};
use crate::error::Result;
use crate::fewshot::{compute_auc, compute_eer, compute_threshold_metrics};
use crate::oracle;
use crate::qsim::{self, Axis, CircuitSpec, Encoding, Entangler, QnnPreset, StateVector, DIM, NUM_QUBITS};
use crate::spectral::{analytic_signal, dft, hilbert, hilbert_appendix_literal, idft, ComplexSeries, RealSeries};
use crate::tensor::{Activation, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<34} {}", self.name, self.detail)
    }
}

type Outcome = std::result::Result<String, String>;

fn within(name: &str, err: f64, tol: f64) -> Outcome {
    if err <= tol {
        Ok(format!("max err {err:.2e} <= {tol:.0e}"))
    } else {
        Err(format!("{name}: max err {err:.3e} > {tol:.0e}"))
    }
}

fn normal_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn complex_vec(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

fn max_diff_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn series(x: Vec<f64>) -> RealSeries {
    RealSeries::new(x).expect("finite test input")
}

fn dft_vs_naive(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [8, 12] {
        for _ in 0..20 {
            let x = complex_vec(rng, n);
            let cs = ComplexSeries::new(x.clone()).expect("finite");
            worst = worst.max(max_diff_c(dft(&cs).values(), &oracle::naive_dft(&x, false)));
            worst = worst.max(max_diff_c(idft(&cs).values(), &oracle::naive_dft(&x, true)));
        }
    }
    within("dft", worst, 1e-12)
}

fn dft_round_trip(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=70 {
        let x = complex_vec(rng, n);
        let cs = ComplexSeries::new(x.clone()).expect("finite");
        worst = worst.max(max_diff_c(idft(&dft(&cs)).values(), &x));
    }
    within("round trip", worst, 1e-10)
}

fn parseval(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [1, 2, 3, 7, 16, 17, 100, 257, 512, 1000, 1024] {
        let x = complex_vec(rng, n);
        let time: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        let spec = dft(&ComplexSeries::new(x).expect("finite"));
        let freq: f64 = spec.values().iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        worst = worst.max((time - freq).abs() / time);
    }
    within("parseval", worst, 1e-9)
}

fn hilbert_quadrature() -> Outcome {
    let w = |n: usize| 2.0 * PI * n as f64 / 8.0;
    let cos: Vec<f64> = (0..8).map(|n| w(n).cos()).collect();
    let sin: Vec<f64> = (0..8).map(|n| w(n).sin()).collect();
    let neg_cos: Vec<f64> = cos.iter().map(|v| -v).collect();
    let e1 = max_diff(hilbert(&series(cos)).expect("n >= 2").values(), &sin);
    let e2 = max_diff(hilbert(&series(sin)).expect("n >= 2").values(), &neg_cos);
    within("quadrature", e1.max(e2), 1e-10)
}

fn hilbert_vs_naive(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 2..=33 {
        let x = normal_vec(rng, n);
        let h = hilbert(&series(x.clone())).expect("n >= 2");
        worst = worst.max(max_diff(h.values(), &oracle::naive_hilbert(&x)));
        let lit = hilbert_appendix_literal(&series(x.clone())).expect("n >= 2");
        worst = worst.max(max_diff_c(lit.values(), &oracle::naive_hilbert_appendix_literal(&x)));
    }
    within("hilbert", worst, 1e-10)
}

fn hilbert_linearity(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2, 5, 8, 31, 64] {
        let (x, y) = (normal_vec(rng, n), normal_vec(rng, n));
        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = hilbert(&series(combo)).expect("n >= 2");
        let hx = hilbert(&series(x)).expect("n >= 2");
        let hy = hilbert(&series(y)).expect("n >= 2");
        let rhs: Vec<f64> = hx
            .values()
            .iter()
            .zip(hy.values())
            .map(|(p, q)| a * p + b * q)
            .collect();
        worst = worst.max(max_diff(lhs.values(), &rhs));
    }
    within("linearity", worst, 1e-10)
}

/// `x` minus its DC and Nyquist components.
fn strip_dc_nyquist(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let dc = x.iter().sum::<f64>() / n as f64;
    let nyq = x
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { *v } else { -v })
        .sum::<f64>()
        / n as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| v - dc - if i % 2 == 0 { nyq } else { -nyq })
        .collect()
}

fn hilbert_involution(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2, 4, 6, 8, 10, 32, 100, 256] {
        let x = normal_vec(rng, n);
        let hh = hilbert(&hilbert(&series(x.clone())).expect("n >= 2")).expect("n >= 2");
        let expect: Vec<f64> = strip_dc_nyquist(&x).iter().map(|v| -v).collect();
        worst = worst.max(max_diff(hh.values(), &expect));
    }
    within("involution", worst, 1e-9)
}

fn one_sided_spectrum(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2, 3, 8, 9, 16, 33, 128] {
        let x = normal_vec(rng, n);
        let norm = dot(&x, &x).sqrt();
        let spec = dft(&analytic_signal(&series(x)).expect("n >= 2"));
        for k in n / 2 + 1..n {
            worst = worst.max(spec.values()[k].norm() / norm);
        }
    }
    within("negative bins", worst, 1e-9)
}

fn anti_self_adjoint(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [2, 3, 8, 15, 64] {
        let (x, y) = (normal_vec(rng, n), normal_vec(rng, n));
        let hx = hilbert(&series(x.clone())).expect("n >= 2");
        let hy = hilbert(&series(y.clone())).expect("n >= 2");
        worst = worst.max((dot(hx.values(), &y) + dot(&x, hy.values())).abs());
    }
    within("<Hx,y> + <x,Hy>", worst, 1e-9)
}

fn random_gate(rng: &mut ChaCha8Rng, state: &mut StateVector) {
    let q = rng.random_range(1..=NUM_QUBITS);
    match rng.random_range(0..4) {
        0 => state
            .rotate(Axis::X, q, rng.random_range(-PI..PI))
            .expect("valid qubit"),
        1 => state
            .rotate(Axis::Y, q, rng.random_range(-PI..PI))
            .expect("valid qubit"),
        k => {
            let mut b = rng.random_range(1..=NUM_QUBITS);
            if b == q {
                b = b % NUM_QUBITS + 1;
            }
            let kind = if k == 2 { Entangler::Cz } else { Entangler::Cnot };
            state.entangle(kind, q, b).expect("distinct qubits");
        }
    }
}

fn qsim_unitarity(rng: &mut ChaCha8Rng) -> Outcome {
    let mut state = StateVector::zero();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        random_gate(rng, &mut state);
        worst = worst.max((state.norm_sqr() - 1.0).abs());
    }
    within("norm drift", worst, 1e-12)
}

fn qsim_reversibility(rng: &mut ChaCha8Rng) -> Outcome {
    let mut state = StateVector::zero();
    for _ in 0..20 {
        random_gate(rng, &mut state);
    }
    let start = *state.amplitudes();
    let mut worst: f64 = 0.0;
    for q in 1..=NUM_QUBITS {
        let theta = rng.random_range(-PI..PI);
        for axis in [Axis::X, Axis::Y] {
            state.rotate(axis, q, theta).expect("valid qubit");
            state.rotate(axis, q, -theta).expect("valid qubit");
            worst = worst.max(max_diff_c(state.amplitudes(), &start));
        }
        for kind in [Entangler::Cz, Entangler::Cnot] {
            let b = q % NUM_QUBITS + 1;
            state.entangle(kind, q, b).expect("distinct");
            state.entangle(kind, q, b).expect("distinct");
            worst = worst.max(max_diff_c(state.amplitudes(), &start));
        }
    }
    within("reversibility", worst, 1e-12)
}

fn qsim_vs_dense(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for preset in [QnnPreset::PaperLiteral, QnnPreset::Table3] {
        for encoding in [Encoding::Raw, Encoding::TanhPi] {
            let spec = CircuitSpec::from_preset(preset, encoding);
            for _ in 0..10 {
                let inputs: [f64; NUM_QUBITS] = std::array::from_fn(|_| rng.random_range(-PI..PI));
                let params: Vec<f64> = (0..spec.num_params()).map(|_| rng.random_range(-PI..PI)).collect();
                let fast = qsim::run_qnn(&inputs, &params, &spec).expect("counts match");
                let slow = oracle::dense_circuit(&inputs, &params, &spec);
                worst = worst.max(max_diff(&fast.expectations, &slow));
            }
        }
    }
    within("dense circuit", worst, 1e-12)
}

fn param_shift_vs_fd(rng: &mut ChaCha8Rng) -> Outcome {
    let spec = CircuitSpec::from_preset(QnnPreset::Table3, Encoding::Raw);
    let inputs: [f64; NUM_QUBITS] = std::array::from_fn(|_| rng.random_range(-PI..PI));
    let params: Vec<f64> = (0..spec.num_params()).map(|_| rng.random_range(-PI..PI)).collect();
    let g = qsim::param_shift_grad(&inputs, &params, &spec).expect("counts match");
    let mut worst: f64 = 0.0;
    for q in 0..NUM_QUBITS {
        let fd = oracle::central_difference(
            |p| qsim::run_qnn(&inputs, p, &spec).expect("counts match").expectations[q],
            &params,
            1e-6,
        );
        for (p, v) in fd.iter().enumerate() {
            worst = worst.max((g.params[p][q] - v).abs());
        }
        let fd_in = oracle::central_difference(
            |x| qsim::run_qnn(x, &params, &spec).expect("counts match").expectations[q],
            &inputs,
            1e-6,
        );
        for (j, v) in fd_in.iter().enumerate() {
            worst = worst.max((g.inputs[j][q] - v).abs());
        }
    }
    within("parameter shift", worst, 1e-6)
}

fn lora_dense_equivalence(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let d_in = rng.random_range(1..=16);
        let d_out = rng.random_range(1..=16);
        let r = rng.random_range(1..=8);
        let alpha = rng.random_range(0.1..4.0);
        let backbone = Backbone::generate(d_in, d_out, trial).expect("valid dims");
        let mut p = init_adapter(d_in, d_out, &AdapterSpec::new(Variant::Lora, r, alpha), trial).expect("valid");
        p.a_up = random_matrix(rng, r, d_out);
        let x = normal_vec(rng, d_in);
        let fast = crate::adapters::lora_forward(&x, &backbone, &p).expect("lora");
        let slow = oracle::lora_dense(&x, backbone.weights(), &p.b_down, &p.a_up, alpha / r as f64);
        worst = worst.max(max_diff(&fast, &slow));
    }
    within("lora", worst, 1e-10)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-0.5..0.5))
}

/// Variants covered by gradient and frozen-path checks, each with a rank it
/// accepts.
pub fn variant_grid() -> Vec<AdapterSpec> {
    let mut specs = vec![
        AdapterSpec::new(Variant::Lora, 3, 1.0),
        AdapterSpec::new(Variant::Hlora, 4, 1.0),
        AdapterSpec::new(Variant::Qlora, NUM_QUBITS, 1.0),
        AdapterSpec::new(Variant::StackedLinear(2), 3, 1.0),
    ];
    for act in [
        Activation::Identity,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Silu,
    ] {
        specs.push(AdapterSpec::new(Variant::Act(act), 3, 1.0));
    }
    let mut input_axis = AdapterSpec::new(Variant::Hlora, 2, 1.0);
    input_axis.hilbert_axis = HilbertAxis::InputFeature;
    specs.push(input_axis);
    let mut literal = AdapterSpec::new(Variant::Qlora, NUM_QUBITS, 1.0);
    literal.qnn_preset = QnnPreset::PaperLiteral;
    literal.qnn_encoding = Encoding::TanhPi;
    literal.qlora_residual = true;
    specs.push(literal);
    specs
}

/// A model with every trainable entry drawn at random, so no gradient is
/// trivially zero.
pub fn random_model(backbone: &Backbone, spec: &AdapterSpec, rng: &mut impl Rng) -> Result<Model> {
    let mut model = Model::init(backbone, spec, rng.random())?;
    for m in model.parameters_mut() {
        *m = random_matrix(rng, m.rows(), m.cols());
    }
    Ok(model)
}

/// Worst ratio of `|analytic - fd|` to `max(1e-4 * magnitude, 1e-6)` over
/// every parameter entry; at most 1 passes.
pub fn gradient_check(model: &Model, backbone: &Backbone, x: &Matrix, labels: &[f64]) -> Result<f64> {
    let (_, grads) = model.loss_and_grads(x, labels, backbone)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for (k, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let orig = probe.parameters_mut()[k].data()[i];
            probe.parameters_mut()[k].data_mut()[i] = orig + h;
            let up = probe.loss(x, labels, backbone)?;
            probe.parameters_mut()[k].data_mut()[i] = orig - h;
            let down = probe.loss(x, labels, backbone)?;
            probe.parameters_mut()[k].data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let analytic = g.data()[i];
            let tol = (1e-4 * analytic.abs().max(fd.abs())).max(1e-6);
            worst = worst.max((analytic - fd).abs() / tol);
        }
    }
    Ok(worst)
}

fn adapter_gradients(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, spec) in variant_grid().iter().enumerate() {
        let (d_in, d_out) = (rng.random_range(4..=8), rng.random_range(1..=8));
        let backbone = Backbone::generate(d_in, d_out, i as u64).map_err(|e| e.to_string())?;
        let model = random_model(&backbone, spec, rng).map_err(|e| e.to_string())?;
        let x = random_matrix(rng, 3, d_in);
        let labels = [1.0, 0.0, 1.0];
        let ratio = gradient_check(&model, &backbone, &x, &labels).map_err(|e| e.to_string())?;
        if ratio > 1.0 {
            return Err(format!("{}: error ratio {ratio:.3}", spec.variant));
        }
        worst = worst.max(ratio);
    }
    Ok(format!("worst error / tolerance {worst:.2e}"))
}

fn frozen_path_identity(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, spec) in variant_grid().iter().enumerate() {
        let backbone = Backbone::generate(8, 5, i as u64).map_err(|e| e.to_string())?;
        let mut p = init_adapter(8, 5, spec, i as u64).map_err(|e| e.to_string())?;
        p.b_down = random_matrix(rng, 8, spec.r);
        let x = random_matrix(rng, 4, 8);
        let out = forward_batch(&x, &backbone, &p).map_err(|e| e.to_string())?;
        let frozen = oracle::naive_matmul(&x, backbone.weights());
        let err = out.output.max_abs_diff(&frozen);
        if spec.variant == Variant::Lora && out.output != x.matmul(backbone.weights()).map_err(|e| e.to_string())? {
            return Err("lora output with A_up = 0 is not bitwise W0 x".into());
        }
        worst = worst.max(err);
    }
    within("frozen path", worst, 1e-12)
}

fn metrics_vs_brute_force(rng: &mut ChaCha8Rng) -> Outcome {
    for trial in 0..50 {
        let n = rng.random_range(2..=100);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // Coarse scores force ties.
        let scores: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(0.0..1.0f64) * 8.0).round() / 8.0)
            .collect();
        let auc = compute_auc(&scores, &labels).map_err(|e| e.to_string())?;
        let auc_ref = oracle::brute_auc(&scores, &labels);
        if (auc - auc_ref).abs() > 1e-12 {
            return Err(format!("trial {trial}: auc {auc} vs {auc_ref}"));
        }
        let t = compute_threshold_metrics(&scores, &labels, 0.5).map_err(|e| e.to_string())?;
        let cm = oracle::brute_confusion(&scores, &labels, 0.5);
        let acc = (cm.tp + cm.tn) as f64 / n as f64;
        let re = cm.tp as f64 / (cm.tp + cm.fn_) as f64;
        if t.acc != acc || t.re != re || t.pr_undefined != (cm.tp + cm.fp == 0) {
            return Err(format!("trial {trial}: confusion metrics differ"));
        }
        let (eer, _) = compute_eer(&scores, &labels).map_err(|e| e.to_string())?;
        let eer_ref = oracle::brute_eer(&scores, &labels);
        if (eer - eer_ref).abs() > 1e-9 {
            return Err(format!("trial {trial}: eer {eer} vs {eer_ref}"));
        }
    }
    Ok("50 random instances agree".into())
}

fn statevector_dim_matches() -> Outcome {
    let s = StateVector::zero();
    if s.amplitudes().len() == DIM {
        Ok(format!("{DIM} amplitudes"))
    } else {
        Err("wrong dimension".into())
    }
}

type CheckFn = Box<dyn FnOnce(&mut ChaCha8Rng) -> Outcome>;

/// Runs every check with a fixed seed.
pub fn run() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57);
    let checks: Vec<(&'static str, CheckFn)> = vec![
        ("dft matches naive sum", Box::new(dft_vs_naive)),
        ("dft round trip", Box::new(dft_round_trip)),
        ("parseval", Box::new(parseval)),
        ("hilbert quadrature", Box::new(|_| hilbert_quadrature())),
        ("hilbert matches naive", Box::new(hilbert_vs_naive)),
        ("hilbert linearity", Box::new(hilbert_linearity)),
        ("hilbert involution", Box::new(hilbert_involution)),
        ("analytic spectrum one-sided", Box::new(one_sided_spectrum)),
        ("hilbert anti-self-adjoint", Box::new(anti_self_adjoint)),
        ("statevector dimension", Box::new(|_| statevector_dim_matches())),
        ("qsim unitarity", Box::new(qsim_unitarity)),
        ("qsim reversibility", Box::new(qsim_reversibility)),
        ("qsim matches dense oracle", Box::new(qsim_vs_dense)),
        ("parameter shift vs fd", Box::new(param_shift_vs_fd)),
        ("lora dense equivalence", Box::new(lora_dense_equivalence)),
        ("adapter gradients vs fd", Box::new(adapter_gradients)),
        ("frozen path identity", Box::new(frozen_path_identity)),
        ("metrics match brute force", Box::new(metrics_vs_brute_force)),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = match f(&mut rng) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            Check { name, passed, detail }
        })
        .collect()
}
