use crate::error::{Error, Result};
use crate::qsim::{self, CircuitSpec, NUM_QUBITS};
use crate::spectral::{envelope_value, hilbert_real, is_degenerate, phase_value};

use super::{sigmoid, Activation, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// Same shape, or a `1 x 1` right operand broadcast over the left.
    Add(Var, Var),
    Hadamard(Var, Var),
    ScalarMul {
        scalar: Var,
        x: Var,
    },
    HilbertRows(Var),
    Envelope {
        re: Var,
        im: Var,
        eps: f64,
    },
    Phase {
        re: Var,
        im: Var,
        eps: f64,
    },
    Activation(Activation, Var),
    Sum(Var),
    BceWithLogits {
        logits: Var,
        labels: Vec<f64>,
    },
    QnnEval {
        inputs: Var,
        params: Var,
        spec: CircuitSpec,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Matrix,
    requires_grad: bool,
    trainable: bool,
}

/// Append-only record of a forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss. Every trainable leaf has an entry, zero when
/// the loss does not depend on it.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
            trainable: false,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        let v = self.push(Op::Leaf, value, true);
        self.nodes[v.0].trainable = true;
        v
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let value = if va.shape() == vb.shape() {
            va.add(vb)?
        } else if vb.shape() == (1, 1) {
            let s = vb.data()[0];
            va.map(|x| x + s)
        } else {
            return Err(Error::Shape(format!(
                "add {}x{} with {}x{}",
                va.rows(),
                va.cols(),
                vb.rows(),
                vb.cols()
            )));
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Hadamard(a, b), value, rg))
    }

    /// `scalar * x` where `scalar` is a `1 x 1` node.
    pub fn scalar_mul(&mut self, scalar: Var, x: Var) -> Result<Var> {
        let s = self
            .value(scalar)
            .as_scalar()
            .ok_or_else(|| Error::Shape("scalar_mul needs a 1x1 scalar operand".into()))?;
        let value = self.value(x).scale(s);
        let rg = self.rg(scalar) || self.rg(x);
        Ok(self.push(Op::ScalarMul { scalar, x }, value, rg))
    }

    /// Standard Hilbert transform of each row.
    pub fn hilbert_rows(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        if v.cols() < 2 {
            return Err(Error::InvalidInput(format!(
                "Hilbert transform needs rows of length >= 2, got {}",
                v.cols()
            )));
        }
        let value = map_rows(v, hilbert_real);
        let rg = self.rg(x);
        Ok(self.push(Op::HilbertRows(x), value, rg))
    }

    /// `sqrt(re^2 + im^2 + eps)` elementwise.
    pub fn envelope(&mut self, re: Var, im: Var, eps: f64) -> Result<Var> {
        let (vr, vi) = (self.value(re), self.value(im));
        if vr.shape() != vi.shape() {
            return Err(Error::Shape("envelope parts differ in shape".into()));
        }
        let value = vr.zip_map(vi, |r, i| envelope_value(r, i, eps));
        let rg = self.rg(re) || self.rg(im);
        Ok(self.push(Op::Envelope { re, im, eps }, value, rg))
    }

    /// Principal-value `atan2(im, re)` elementwise, zero at degenerate points.
    pub fn phase(&mut self, re: Var, im: Var, eps: f64) -> Result<Var> {
        let (vr, vi) = (self.value(re), self.value(im));
        if vr.shape() != vi.shape() {
            return Err(Error::Shape("phase parts differ in shape".into()));
        }
        let value = vr.zip_map(vi, |r, i| phase_value(r, i, eps));
        let rg = self.rg(re) || self.rg(im);
        Ok(self.push(Op::Phase { re, im, eps }, value, rg))
    }

    pub fn activation(&mut self, act: Activation, x: Var) -> Var {
        let value = self.value(x).map(|v| act.apply(v));
        let rg = self.rg(x);
        self.push(Op::Activation(act, x), value, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.activation(Activation::Sigmoid, x)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Matrix::scalar(self.value(x).sum());
        let rg = self.rg(x);
        self.push(Op::Sum(x), value, rg)
    }

    /// Mean binary cross-entropy of an `n x 1` logit column against 0/1 labels.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var> {
        let v = self.value(logits);
        if v.cols() != 1 || v.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "bce_with_logits: {}x{} logits for {} labels",
                v.rows(),
                v.cols(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
            return Err(Error::InvalidInput(format!("label {l} is not 0 or 1")));
        }
        let total: f64 = v
            .data()
            .iter()
            .zip(labels)
            .map(|(&z, &y)| super::bce_with_logits(z, y))
            .sum();
        let value = Matrix::scalar(total / labels.len() as f64);
        let rg = self.rg(logits);
        Ok(self.push(
            Op::BceWithLogits {
                logits,
                labels: labels.to_vec(),
            },
            value,
            rg,
        ))
    }

    /// Circuit expectations for each row of `inputs` (`n x 4`) under the
    /// shared angle row `params` (`1 x P`).
    pub fn qnn_eval(&mut self, inputs: Var, params: Var, spec: CircuitSpec) -> Result<Var> {
        let (vi, vp) = (self.value(inputs), self.value(params));
        if vi.cols() != NUM_QUBITS || vp.rows() != 1 {
            return Err(Error::Shape(format!(
                "qnn_eval: inputs {}x{}, params {}x{}",
                vi.rows(),
                vi.cols(),
                vp.rows(),
                vp.cols()
            )));
        }
        let mut data = Vec::with_capacity(vi.len());
        for r in 0..vi.rows() {
            let out = qsim::run_qnn(vi.row(r), vp.data(), &spec)?;
            data.extend_from_slice(&out.expectations);
        }
        let value = Matrix::from_raw(vi.rows(), NUM_QUBITS, data);
        let rg = self.rg(inputs) || self.rg(params);
        Ok(self.push(Op::QnnEval { inputs, params, spec }, value, rg))
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(Error::Contract(format!("backward needs a scalar loss, got {r}x{c}")));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut grads)?;
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if node.trainable {
                if grads[idx].is_none() {
                    let (r, c) = node.value.shape();
                    grads[idx] = Some(Matrix::zeros(r, c));
                }
            } else {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let mut acc = |v: Var, delta: Matrix| {
            if !self.rg(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot => *slot = Some(delta),
            }
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    acc(*a, g.matmul_t(self.value(*b))?);
                }
                if self.rg(*b) {
                    acc(*b, self.value(*a).t_matmul(g)?);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                if self.rg(*b) {
                    if self.value(*b).shape() == g.shape() {
                        acc(*b, g.clone());
                    } else {
                        acc(*b, Matrix::scalar(g.sum()));
                    }
                }
            }
            Op::Hadamard(a, b) => {
                if self.rg(*a) {
                    acc(*a, g.hadamard(self.value(*b))?);
                }
                if self.rg(*b) {
                    acc(*b, g.hadamard(self.value(*a))?);
                }
            }
            Op::ScalarMul { scalar, x } => {
                if self.rg(*scalar) {
                    let d: f64 = g.data().iter().zip(self.value(*x).data()).map(|(a, b)| a * b).sum();
                    acc(*scalar, Matrix::scalar(d));
                }
                if self.rg(*x) {
                    acc(*x, g.scale(self.value(*scalar).data()[0]));
                }
            }
            Op::HilbertRows(x) => {
                // The standard transform is anti-self-adjoint, so its adjoint is -H.
                let h = map_rows(g, hilbert_real);
                acc(*x, h.scale(-1.0));
            }
            Op::Envelope { re, im, eps } => {
                let (vr, vi) = (self.value(*re), self.value(*im));
                let (mut gr, mut gi) = (Matrix::zeros(g.rows(), g.cols()), Matrix::zeros(g.rows(), g.cols()));
                for k in 0..g.len() {
                    let (r, i) = (vr.data()[k], vi.data()[k]);
                    if is_degenerate(r, i, *eps) {
                        continue;
                    }
                    let env = node.value.data()[k];
                    gr.data_mut()[k] = g.data()[k] * r / env;
                    gi.data_mut()[k] = g.data()[k] * i / env;
                }
                acc(*re, gr);
                acc(*im, gi);
            }
            Op::Phase { re, im, eps } => {
                let (vr, vi) = (self.value(*re), self.value(*im));
                let (mut gr, mut gi) = (Matrix::zeros(g.rows(), g.cols()), Matrix::zeros(g.rows(), g.cols()));
                for k in 0..g.len() {
                    let (r, i) = (vr.data()[k], vi.data()[k]);
                    if is_degenerate(r, i, *eps) {
                        continue;
                    }
                    let denom = r * r + i * i + eps;
                    gr.data_mut()[k] = -g.data()[k] * i / denom;
                    gi.data_mut()[k] = g.data()[k] * r / denom;
                }
                acc(*re, gr);
                acc(*im, gi);
            }
            Op::Activation(act, x) => {
                let d = self.value(*x).map(|v| act.derivative(v));
                acc(*x, g.hadamard(&d)?);
            }
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                acc(*x, Matrix::filled(r, c, g.data()[0]));
            }
            Op::BceWithLogits { logits, labels } => {
                let n = labels.len() as f64;
                let scale = g.data()[0] / n;
                let d: Vec<f64> = self
                    .value(*logits)
                    .data()
                    .iter()
                    .zip(labels)
                    .map(|(&z, &y)| scale * (sigmoid(z) - y))
                    .collect();
                acc(*logits, Matrix::from_raw(labels.len(), 1, d));
            }
            Op::QnnEval { inputs, params, spec } => {
                let (vi, vp) = (self.value(*inputs), self.value(*params));
                let (want_in, want_p) = (self.rg(*inputs), self.rg(*params));
                let mut gin = Matrix::zeros(vi.rows(), NUM_QUBITS);
                let mut gp = Matrix::zeros(1, vp.cols());
                for r in 0..vi.rows() {
                    let jac = qsim::param_shift_partial(vi.row(r), vp.data(), spec, want_in, want_p)?;
                    let gr = g.row(r);
                    if want_in {
                        for (j, col) in jac.inputs.iter().enumerate() {
                            gin.row_mut(r)[j] = col.iter().zip(gr).map(|(a, b)| a * b).sum();
                        }
                    }
                    if want_p {
                        for (p, col) in jac.params.iter().enumerate() {
                            gp.data_mut()[p] += col.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                }
                if want_in {
                    acc(*inputs, gin);
                }
                if want_p {
                    acc(*params, gp);
                }
            }
        }
        Ok(())
    }
}

fn map_rows(m: &Matrix, f: impl Fn(&[f64]) -> Vec<f64>) -> Matrix {
    let mut data = Vec::with_capacity(m.len());
    for r in 0..m.rows() {
        data.extend(f(m.row(r)));
    }
    Matrix::from_raw(m.rows(), m.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_has_gradient_six_at_three() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(3.0));
        let y = t.hadamard(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().as_scalar(), Some(6.0));
    }

    #[test]
    fn leaves_off_the_path_get_zero() {
        let mut t = Tape::new();
        let unused = t.param(Matrix::filled(2, 3, 1.5));
        let c = t.constant(Matrix::row_vector(vec![1.0, 2.0, 3.0]));
        let s = t.sum(c);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(unused).unwrap(), &Matrix::zeros(2, 3));
        assert!(g.get(c).is_none());
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let x = t.param(Matrix::zeros(2, 2));
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn scalar_broadcast_add_sums_gradient() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::column_vector(vec![1.0, 2.0, 3.0]));
        let b = t.param(Matrix::scalar(0.5));
        let y = t.add(x, b).unwrap();
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(b).unwrap().as_scalar(), Some(3.0));
    }

    #[test]
    fn envelope_has_zero_subgradient_at_origin() {
        let mut t = Tape::new();
        let re = t.param(Matrix::row_vector(vec![0.0, 3.0]));
        let im = t.param(Matrix::row_vector(vec![0.0, 4.0]));
        let e = t.envelope(re, im, 1e-12).unwrap();
        let p = t.phase(re, im, 1e-12).unwrap();
        let both = t.add(e, p).unwrap();
        let s = t.sum(both);
        let g = t.backward(s).unwrap();
        let (gr, gi) = (g.get(re).unwrap(), g.get(im).unwrap());
        assert_eq!(gr.data()[0], 0.0);
        assert_eq!(gi.data()[0], 0.0);
        assert!((gr.data()[1] - (0.6 - 4.0 / 25.0)).abs() < 1e-9);
        assert!((gi.data()[1] - (0.8 + 3.0 / 25.0)).abs() < 1e-9);
    }

    #[test]
    fn hilbert_needs_two_columns() {
        let mut t = Tape::new();
        let x = t.param(Matrix::zeros(3, 1));
        assert!(t.hilbert_rows(x).is_err());
    }
}
