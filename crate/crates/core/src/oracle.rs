//! Slow reference implementations written straight from the definitions.
//! They share no code with the fast paths and exist to cross-check them.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::qsim::{Axis, CircuitSpec, Entangler, DIM, NUM_QUBITS};
use crate::tensor::Matrix;

/// `X(k) = sum_n x(n) e^{-2 pi i k n / N}`; the inverse divides by `N`.
pub fn naive_dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let norm = if inverse { 1.0 / n as f64 } else { 1.0 };
    (0..n)
        .map(|k| {
            let acc: Complex64 = x
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let angle = sign * 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, angle)
                })
                .sum();
            acc * norm
        })
        .collect()
}

fn real_to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Standard Hilbert transform: multiply bins by `-i sign(freq)`, DC and
/// Nyquist zeroed.
pub fn naive_hilbert(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut spec = naive_dft(&real_to_complex(x), false);
    for (k, v) in spec.iter_mut().enumerate() {
        let freq = k as i64 - if 2 * k > n { n as i64 } else { 0 };
        let m = if freq == 0 || 2 * k == n {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -(freq.signum() as f64))
        };
        *v *= m;
    }
    naive_dft(&spec, true).into_iter().map(|c| c.re).collect()
}

/// Keep bins `k <= N/2`, negate the rest, invert.
pub fn naive_hilbert_appendix_literal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut spec = naive_dft(&real_to_complex(x), false);
    for (k, v) in spec.iter_mut().enumerate() {
        if 2 * k > n {
            *v = -*v;
        }
    }
    naive_dft(&spec, true)
}

pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows(), "inner dimensions");
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let mut acc = 0.0;
        for k in 0..a.cols() {
            acc += a.get(i, k) * b.get(k, j);
        }
        acc
    })
}

/// Column-vector LoRA: `W0^T x + scale A^T B^T x` with `W0: d_in x d_out`,
/// `B: d_in x r`, `A: r x d_out`, evaluated with explicit sums.
pub fn lora_dense(x: &[f64], w0: &Matrix, b: &Matrix, a: &Matrix, scale: f64) -> Vec<f64> {
    let z: Vec<f64> = (0..b.cols())
        .map(|j| (0..x.len()).map(|i| b.get(i, j) * x[i]).sum())
        .collect();
    (0..w0.cols())
        .map(|o| {
            let frozen: f64 = (0..x.len()).map(|i| w0.get(i, o) * x[i]).sum();
            let up: f64 = (0..z.len()).map(|j| a.get(j, o) * z[j]).sum();
            frozen + scale * up
        })
        .collect()
}

/// Dense `DIM x DIM` complex operator, row-major.
pub type Dense = Vec<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn kron(a: &[Complex64], an: usize, b: &[Complex64], bn: usize) -> Vec<Complex64> {
    let n = an * bn;
    let mut out = vec![c(0.0, 0.0); n * n];
    for i in 0..an {
        for j in 0..an {
            for k in 0..bn {
                for l in 0..bn {
                    out[(i * bn + k) * n + j * bn + l] = a[i * an + j] * b[k * bn + l];
                }
            }
        }
    }
    out
}

/// Tensor product of single-qubit operators; `ops[0]` acts on qubit 1, the
/// least-significant bit.
fn kron_all(ops: [&[Complex64]; NUM_QUBITS]) -> Dense {
    let mut acc = vec![c(1.0, 0.0)];
    let mut n = 1;
    for op in ops.iter().rev() {
        acc = kron(&acc, n, op, 2);
        n *= 2;
    }
    acc
}

const I2: [Complex64; 4] = [c0(1.0), c0(0.0), c0(0.0), c0(1.0)];
const P0: [Complex64; 4] = [c0(1.0), c0(0.0), c0(0.0), c0(0.0)];
const P1: [Complex64; 4] = [c0(0.0), c0(0.0), c0(0.0), c0(1.0)];
const X2: [Complex64; 4] = [c0(0.0), c0(1.0), c0(1.0), c0(0.0)];
const Z2: [Complex64; 4] = [c0(1.0), c0(0.0), c0(0.0), c0(-1.0)];

const fn c0(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn embed(qubit: usize, op: &[Complex64]) -> Dense {
    let mut ops: [&[Complex64]; NUM_QUBITS] = [&I2; NUM_QUBITS];
    ops[qubit - 1] = op;
    kron_all(ops)
}

fn embed_pair(a: usize, op_a: &[Complex64], b: usize, op_b: &[Complex64]) -> Dense {
    let mut ops: [&[Complex64]; NUM_QUBITS] = [&I2; NUM_QUBITS];
    ops[a - 1] = op_a;
    ops[b - 1] = op_b;
    kron_all(ops)
}

fn dense_add(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `exp(-i theta sigma / 2)` on `qubit` (1-based).
pub fn dense_rotation(axis: Axis, qubit: usize, theta: f64) -> Dense {
    let (s, co) = (theta / 2.0).sin_cos();
    let u = match axis {
        Axis::X => [c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)],
        Axis::Y => [c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)],
    };
    embed(qubit, &u)
}

/// `|0><0|_a (x) I + |1><1|_a (x) U_b` with `U = Z` (CZ) or `X` (CNOT).
pub fn dense_entangler(kind: Entangler, a: usize, b: usize) -> Dense {
    let target: &[Complex64] = match kind {
        Entangler::Cz => &Z2,
        Entangler::Cnot => &X2,
    };
    dense_add(&embed(a, &P0), &embed_pair(a, &P1, b, target))
}

pub fn dense_matmul(a: &Dense, b: &Dense) -> Dense {
    let mut out = vec![c(0.0, 0.0); DIM * DIM];
    for i in 0..DIM {
        for k in 0..DIM {
            let aik = a[i * DIM + k];
            for j in 0..DIM {
                out[i * DIM + j] += aik * b[k * DIM + j];
            }
        }
    }
    out
}

pub fn dense_apply(u: &Dense, state: &[Complex64]) -> Vec<Complex64> {
    (0..DIM)
        .map(|i| (0..DIM).map(|j| u[i * DIM + j] * state[j]).sum())
        .collect()
}

/// `<Z_q>` computed as `<psi| Z_q |psi>` with the embedded operator.
pub fn dense_z_expectations(state: &[Complex64]) -> [f64; NUM_QUBITS] {
    std::array::from_fn(|q| {
        let zq = embed(q + 1, &Z2);
        let applied = dense_apply(&zq, state);
        state.iter().zip(&applied).map(|(a, b)| (a.conj() * b).re).sum()
    })
}

/// Whole circuit as one dense unitary, given already-encoded RX angles.
pub fn dense_circuit_unitary(angles: &[f64; NUM_QUBITS], params: &[f64], repetitions: usize) -> Dense {
    let mut u = embed(1, &I2);
    let mut then = |g: Dense| u = dense_matmul(&g, &u);
    for (q, &theta) in angles.iter().enumerate() {
        then(dense_rotation(Axis::X, q + 1, theta));
    }
    let mut p = params.iter().copied();
    for _ in 0..repetitions {
        for _ in 0..2 {
            for q in 1..=NUM_QUBITS {
                then(dense_rotation(Axis::Y, q, p.next().expect("enough angles")));
            }
            for (a, b) in [(1, 2), (3, 4), (2, 3), (4, 1)] {
                then(dense_entangler(Entangler::Cz, a, b));
            }
        }
        for q in 1..=NUM_QUBITS {
            then(dense_rotation(Axis::Y, q, p.next().expect("enough angles")));
        }
        for (a, b) in [(1, 2), (2, 3), (3, 4)] {
            then(dense_entangler(Entangler::Cnot, a, b));
        }
    }
    u
}

/// Circuit readout via the dense unitary applied to `|0000>`.
pub fn dense_circuit(inputs: &[f64; NUM_QUBITS], params: &[f64], spec: &CircuitSpec) -> [f64; NUM_QUBITS] {
    let angles = inputs.map(|x| spec.encoding.angle(x));
    let u = dense_circuit_unitary(&angles, params, spec.repetitions);
    let mut zero = vec![c(0.0, 0.0); DIM];
    zero[0] = c(1.0, 0.0);
    dense_z_expectations(&dense_apply(&u, &zero))
}

/// Fraction of positive/negative pairs ordered correctly, ties worth half.
pub fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut credit, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                credit += 1.0;
            } else if si == sj {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn brute_confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Confusion {
    let count = |pred: bool, label: u8| {
        scores
            .iter()
            .zip(labels)
            .filter(|(&s, &l)| (s >= threshold) == pred && l == label)
            .count()
    };
    Confusion {
        tp: count(true, 1),
        fp: count(true, 0),
        tn: count(false, 0),
        fn_: count(false, 1),
    }
}

/// Error rates at every distinct score and at `+inf`, each counted from
/// scratch, then the first sign change of `FPR - FNR` interpolated.
pub fn brute_eer(scores: &[f64], labels: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    let rates: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let cm = brute_confusion(scores, labels, t);
            (cm.fp as f64 / neg, cm.fn_ as f64 / pos)
        })
        .collect();
    for w in rates.windows(2) {
        let ((fpr0, fnr0), (fpr1, fnr1)) = (w[0], w[1]);
        let (d0, d1) = (fpr0 - fnr0, fpr1 - fnr1);
        if d0 == 0.0 {
            return fpr0;
        }
        if d0 > 0.0 && d1 <= 0.0 {
            return fpr0 + d0 / (d0 - d1) * (fpr1 - fpr0);
        }
    }
    panic!("no crossing")
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error used for gradient checks; absolute below `floor`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
