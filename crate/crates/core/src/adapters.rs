//! Frozen backbone, low-rank adapter variants, and the linear classifier head.
//!
//! Shapes follow the row-vector convention: a batch `X` is `n x d_in`, the
//! backbone `W0` is `d_in x d_out`, `B_down` is `d_in x r` and `A_up` is
//! `r x d_out`. The fused output for every variant is
//!
//! ```text
//! h = X W0 + scale * g(X B_down) A_up
//! ```
//!
//! where `g` is the variant's bottleneck transform and `scale` is the fixed
//! `alpha / r`, except for H-LoRA where it is a trainable scalar.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{CircuitSpec, Encoding, QnnPreset, NUM_QUBITS};
use crate::spectral::DEFAULT_EPS;
use crate::tensor::{Activation, Matrix, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Lora,
    Hlora,
    Qlora,
    Act(Activation),
    StackedLinear(usize),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Lora => f.write_str("lora"),
            Variant::Hlora => f.write_str("hlora"),
            Variant::Qlora => f.write_str("qlora"),
            Variant::Act(a) => {
                let name = match a {
                    Activation::Identity => "identity",
                    Activation::Tanh => "tanh",
                    Activation::Sigmoid => "sigmoid",
                    Activation::Silu => "silu",
                };
                write!(f, "act-{name}")
            }
            Variant::StackedLinear(n) => write!(f, "stacked-linear-{n}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = match s {
            "lora" => Variant::Lora,
            "hlora" => Variant::Hlora,
            "qlora" => Variant::Qlora,
            "act-identity" => Variant::Act(Activation::Identity),
            "act-tanh" => Variant::Act(Activation::Tanh),
            "act-sigmoid" => Variant::Act(Activation::Sigmoid),
            "act-silu" => Variant::Act(Activation::Silu),
            _ => match s.strip_prefix("stacked-linear-").map(str::parse::<usize>) {
                Some(Ok(n)) => Variant::StackedLinear(n),
                _ => {
                    return Err(Error::Config(format!(
                        "unknown variant {s:?}; expected lora, hlora, qlora, \
                         act-{{identity,tanh,sigmoid,silu}} or stacked-linear-N"
                    )))
                }
            },
        };
        Ok(v)
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where H-LoRA applies the Hilbert transform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HilbertAxis {
    /// Along the `r` entries of the down-projected bottleneck.
    #[default]
    Bottleneck,
    /// Along the `d_in` input features, before down-projection.
    InputFeature,
}

fn default_rank() -> usize {
    4
}

fn default_alpha() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    DEFAULT_EPS
}

/// Adapter hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterSpec {
    pub variant: Variant,
    #[serde(default = "default_rank")]
    pub r: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub hilbert_axis: HilbertAxis,
    #[serde(default)]
    pub qnn_preset: QnnPreset,
    #[serde(default)]
    pub qnn_encoding: Encoding,
    /// Q-LoRA only: add the bottleneck back onto the circuit readout.
    #[serde(default)]
    pub qlora_residual: bool,
    /// Envelope guard for H-LoRA.
    #[serde(default = "default_eps")]
    pub eps: f64,
}

impl AdapterSpec {
    pub fn new(variant: Variant, r: usize, alpha: f64) -> Self {
        AdapterSpec {
            variant,
            r,
            alpha,
            hilbert_axis: HilbertAxis::default(),
            qnn_preset: QnnPreset::default(),
            qnn_encoding: Encoding::default(),
            qlora_residual: false,
            eps: DEFAULT_EPS,
        }
    }

    pub fn circuit(&self) -> CircuitSpec {
        CircuitSpec::from_preset(self.qnn_preset, self.qnn_encoding)
    }

    pub fn validate(&self, d_in: usize, d_out: usize) -> Result<()> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::Config(format!(
                "dimensions must be positive, got {d_in}x{d_out}"
            )));
        }
        if self.r == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Config("alpha must be finite".into()));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config("eps must be positive".into()));
        }
        match self.variant {
            Variant::Hlora => match self.hilbert_axis {
                HilbertAxis::Bottleneck if self.r < 2 => {
                    Err(Error::Config("hlora on the bottleneck axis needs r >= 2".into()))
                }
                HilbertAxis::InputFeature if d_in < 2 => {
                    Err(Error::Config("hlora on the input axis needs d_in >= 2".into()))
                }
                _ => Ok(()),
            },
            Variant::Qlora if self.r != NUM_QUBITS => Err(Error::Config(format!(
                "qlora needs r = {NUM_QUBITS} (one bottleneck value per qubit), got {}",
                self.r
            ))),
            Variant::StackedLinear(0) => Err(Error::Config("stacked-linear needs at least one layer".into())),
            _ => Ok(()),
        }
    }
}

/// Frozen `d_in x d_out` linear map, regenerable from its seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone {
    w0: Matrix,
    seed: u64,
}

impl Backbone {
    /// Gaussian entries with variance `1 / d_in`.
    pub fn generate(d_in: usize, d_out: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::Config("backbone dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = 1.0 / (d_in as f64).sqrt();
        let w0 = Matrix::from_fn(d_in, d_out, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * s
        });
        Ok(Backbone { w0, seed })
    }

    pub fn from_matrix(w0: Matrix) -> Self {
        Backbone { w0, seed: 0 }
    }

    pub fn weights(&self) -> &Matrix {
        &self.w0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn d_in(&self) -> usize {
        self.w0.rows()
    }

    pub fn d_out(&self) -> usize {
        self.w0.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdapterParams {
    pub spec: AdapterSpec,
    pub b_down: Matrix,
    pub a_up: Matrix,
    /// H-LoRA's trainable output scale, `1 x 1`.
    pub hlora_scale: Matrix,
    /// Q-LoRA circuit angles, `1 x P`.
    pub qnn_angles: Option<Matrix>,
    /// `r x r` maps for `stacked-linear-N`.
    pub stacked: Vec<Matrix>,
}

impl AdapterParams {
    pub fn rank(&self) -> usize {
        self.spec.r
    }

    pub fn variant(&self) -> Variant {
        self.spec.variant
    }

    pub fn hlora_scale_value(&self) -> f64 {
        self.hlora_scale.data()[0]
    }

    fn fixed_scale(&self) -> f64 {
        self.spec.alpha / self.spec.r as f64
    }

    pub fn parameters(&self) -> Vec<&Matrix> {
        let mut out = vec![&self.b_down, &self.a_up];
        match self.spec.variant {
            Variant::Hlora => out.push(&self.hlora_scale),
            Variant::Qlora => out.extend(self.qnn_angles.as_ref()),
            Variant::StackedLinear(_) => out.extend(self.stacked.iter()),
            _ => {}
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.b_down, &mut self.a_up];
        match self.spec.variant {
            Variant::Hlora => out.push(&mut self.hlora_scale),
            Variant::Qlora => out.extend(self.qnn_angles.as_mut()),
            Variant::StackedLinear(_) => out.extend(self.stacked.iter_mut()),
            _ => {}
        }
        out
    }

    pub fn trainable_count(&self) -> usize {
        self.parameters().iter().map(|m| m.len()).sum()
    }

    /// Trainable parameters beyond the two low-rank factors.
    pub fn extra_count(&self) -> usize {
        self.trainable_count() - self.b_down.len() - self.a_up.len()
    }
}

pub fn init_adapter(d_in: usize, d_out: usize, spec: &AdapterSpec, seed: u64) -> Result<AdapterParams> {
    init_adapter_with(d_in, d_out, spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn init_adapter_with(d_in: usize, d_out: usize, spec: &AdapterSpec, rng: &mut ChaCha8Rng) -> Result<AdapterParams> {
    spec.validate(d_in, d_out)?;
    let r = spec.r;
    let bound = 1.0 / (d_in as f64).sqrt();
    let b_down = Matrix::from_fn(d_in, r, |_, _| rng.random_range(-bound..=bound));
    let a_up = Matrix::zeros(r, d_out);
    let hlora_scale = Matrix::scalar(spec.alpha / r as f64);
    let qnn_angles = (spec.variant == Variant::Qlora).then(|| {
        let p = spec.circuit().num_params();
        Matrix::from_fn(1, p, |_, _| rng.random_range(-0.1..=0.1))
    });
    let stacked = match spec.variant {
        Variant::StackedLinear(n) => vec![Matrix::identity(r); n],
        _ => Vec::new(),
    };
    Ok(AdapterParams {
        spec: spec.clone(),
        b_down,
        a_up,
        hlora_scale,
        qnn_angles,
        stacked,
    })
}

/// Single linear output unit: `logit = h w + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead {
    pub w: Matrix,
    pub b: Matrix,
}

impl ClassifierHead {
    /// Uniform in `+-1/sqrt(d)`, zero bias.
    pub fn init(d: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        ClassifierHead {
            w: Matrix::from_fn(d, 1, |_, _| rng.random_range(-bound..=bound)),
            b: Matrix::scalar(0.0),
        }
    }

    pub fn zeros(d: usize) -> Self {
        ClassifierHead {
            w: Matrix::zeros(d, 1),
            b: Matrix::scalar(0.0),
        }
    }
}

/// Nodes recorded for one forward pass.
#[derive(Debug)]
pub struct Recorded {
    /// Trainable leaves in [`Model::parameters_mut`] order (empty when
    /// recorded as constants).
    pub params: Vec<Var>,
    /// `X B_down`, before the variant transform.
    pub bottleneck: Var,
    /// What gets up-projected.
    pub transformed: Var,
    pub output: Var,
    pub logits: Option<Var>,
}

fn leaf(tape: &mut Tape, m: &Matrix, trainable: bool, params: &mut Vec<Var>) -> Var {
    if trainable {
        let v = tape.param(m.clone());
        params.push(v);
        v
    } else {
        tape.constant(m.clone())
    }
}

/// Records `X W0 + delta` on the tape, where `x` is an `n x d_in` node.
pub fn record_adapter(
    tape: &mut Tape,
    x: Var,
    backbone: &Backbone,
    p: &AdapterParams,
    trainable: bool,
) -> Result<Recorded> {
    let spec = &p.spec;
    let d_in = tape.value(x).cols();
    if d_in != backbone.d_in() || p.b_down.rows() != d_in || p.a_up.cols() != backbone.d_out() {
        return Err(Error::Shape(format!(
            "input width {d_in}, backbone {}x{}, adapter {}x{} / {}x{}",
            backbone.d_in(),
            backbone.d_out(),
            p.b_down.rows(),
            p.b_down.cols(),
            p.a_up.rows(),
            p.a_up.cols()
        )));
    }
    spec.validate(backbone.d_in(), backbone.d_out())?;

    let mut params = Vec::new();
    let b = leaf(tape, &p.b_down, trainable, &mut params);
    let a = leaf(tape, &p.a_up, trainable, &mut params);

    let (bottleneck, transformed, scale) = match spec.variant {
        Variant::Lora => {
            let xl = tape.matmul(x, b)?;
            (xl, xl, tape.constant(Matrix::scalar(p.fixed_scale())))
        }
        Variant::Act(act) => {
            let xl = tape.matmul(x, b)?;
            let t = tape.activation(act, xl);
            (xl, t, tape.constant(Matrix::scalar(p.fixed_scale())))
        }
        Variant::StackedLinear(_) => {
            let xl = tape.matmul(x, b)?;
            let mut t = xl;
            for m in &p.stacked {
                let l = leaf(tape, m, trainable, &mut params);
                t = tape.matmul(t, l)?;
            }
            (xl, t, tape.constant(Matrix::scalar(p.fixed_scale())))
        }
        Variant::Hlora => {
            let s = leaf(tape, &p.hlora_scale, trainable, &mut params);
            match spec.hilbert_axis {
                HilbertAxis::Bottleneck => {
                    let xl = tape.matmul(x, b)?;
                    let enh = enhance(tape, xl, spec.eps)?;
                    (xl, enh, s)
                }
                HilbertAxis::InputFeature => {
                    let enh = enhance(tape, x, spec.eps)?;
                    let xl = tape.matmul(enh, b)?;
                    (xl, xl, s)
                }
            }
        }
        Variant::Qlora => {
            let angles = p
                .qnn_angles
                .as_ref()
                .ok_or_else(|| Error::Config("qlora adapter is missing circuit angles".into()))?;
            let q = leaf(tape, angles, trainable, &mut params);
            let xl = tape.matmul(x, b)?;
            let mut z = tape.qnn_eval(xl, q, spec.circuit())?;
            if spec.qlora_residual {
                z = tape.add(z, xl)?;
            }
            (xl, z, tape.constant(Matrix::scalar(p.fixed_scale())))
        }
    };

    let up = tape.matmul(transformed, a)?;
    let delta = tape.scalar_mul(scale, up)?;
    let w0 = tape.constant(backbone.weights().clone());
    let frozen = tape.matmul(x, w0)?;
    let output = tape.add(frozen, delta)?;

    Ok(Recorded {
        params,
        bottleneck,
        transformed,
        output,
        logits: None,
    })
}

/// `x + envelope + phase` of the row-wise analytic signal of `x`.
fn enhance(tape: &mut Tape, x: Var, eps: f64) -> Result<Var> {
    let hx = tape.hilbert_rows(x)?;
    let env = tape.envelope(x, hx, eps)?;
    let ph = tape.phase(x, hx, eps)?;
    let s = tape.add(x, env)?;
    tape.add(s, ph)
}

/// Adapter plus classifier head; the unit that gets trained.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub adapter: AdapterParams,
    pub head: ClassifierHead,
}

impl Model {
    /// Adapter and head initialized from one seeded stream.
    pub fn init(backbone: &Backbone, spec: &AdapterSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let adapter = init_adapter_with(backbone.d_in(), backbone.d_out(), spec, &mut rng)?;
        let head = ClassifierHead::init(backbone.d_out(), &mut rng);
        Ok(Model { adapter, head })
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.adapter.parameters_mut();
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    /// Adapter plus head.
    pub fn trainable_count(&self) -> usize {
        self.adapter.trainable_count() + self.head.w.len() + self.head.b.len()
    }

    pub fn record(&self, tape: &mut Tape, x: Var, backbone: &Backbone, trainable: bool) -> Result<Recorded> {
        let mut rec = record_adapter(tape, x, backbone, &self.adapter, trainable)?;
        let mut params = std::mem::take(&mut rec.params);
        let w = leaf(tape, &self.head.w, trainable, &mut params);
        let b = leaf(tape, &self.head.b, trainable, &mut params);
        let hw = tape.matmul(rec.output, w)?;
        rec.logits = Some(tape.add(hw, b)?);
        rec.params = params;
        Ok(rec)
    }

    /// Mean BCE over the rows of `x` and its gradient for each matrix of
    /// [`Model::parameters_mut`], in that order.
    pub fn loss_and_grads(&self, x: &Matrix, labels: &[f64], backbone: &Backbone) -> Result<(f64, Vec<Matrix>)> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let rec = self.record(&mut tape, xv, backbone, true)?;
        let loss = tape.bce_with_logits(rec.logits.expect("head recorded"), labels)?;
        let value = tape.value(loss).data()[0];
        let mut grads = tape.backward(loss)?;
        let g = rec
            .params
            .iter()
            .map(|&p| grads.take(p).expect("every parameter has a gradient"))
            .collect();
        Ok((value, g))
    }

    pub fn loss(&self, x: &Matrix, labels: &[f64], backbone: &Backbone) -> Result<f64> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let rec = self.record(&mut tape, xv, backbone, false)?;
        let loss = tape.bce_with_logits(rec.logits.expect("head recorded"), labels)?;
        Ok(tape.value(loss).data()[0])
    }

    /// Logits for each row of `x`, no gradients.
    pub fn logits(&self, x: &Matrix, backbone: &Backbone) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let rec = self.record(&mut tape, xv, backbone, false)?;
        Ok(tape.value(rec.logits.expect("head recorded")).data().to_vec())
    }
}

/// Result of a forward pass without gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub bottleneck: Matrix,
    pub transformed: Matrix,
    pub output: Matrix,
}

/// Forward pass for a batch of row vectors.
pub fn forward_batch(x: &Matrix, backbone: &Backbone, params: &AdapterParams) -> Result<ForwardOutput> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let rec = record_adapter(&mut tape, xv, backbone, params, false)?;
    Ok(ForwardOutput {
        bottleneck: tape.value(rec.bottleneck).clone(),
        transformed: tape.value(rec.transformed).clone(),
        output: tape.value(rec.output).clone(),
    })
}

fn forward_one(x: &[f64], backbone: &Backbone, params: &AdapterParams) -> Result<Vec<f64>> {
    let m = Matrix::new(1, x.len(), x.to_vec())?;
    Ok(forward_batch(&m, backbone, params)?.output.into_data())
}

fn require_variant(params: &AdapterParams, ok: bool, name: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} called on a {} adapter",
            params.variant()
        )))
    }
}

/// `W0^T x + (alpha / r) A_up^T B_down^T x`.
pub fn lora_forward(x: &[f64], backbone: &Backbone, params: &AdapterParams) -> Result<Vec<f64>> {
    require_variant(params, params.variant() == Variant::Lora, "lora_forward")?;
    forward_one(x, backbone, params)
}

/// Bottleneck augmented with its envelope and phase, up-projected by the
/// learned scale.
pub fn hlora_forward(x: &[f64], backbone: &Backbone, params: &AdapterParams) -> Result<Vec<f64>> {
    require_variant(params, params.variant() == Variant::Hlora, "hlora_forward")?;
    forward_one(x, backbone, params)
}

/// Bottleneck encoded into the circuit; Pauli-Z readout is up-projected.
pub fn qlora_forward(x: &[f64], backbone: &Backbone, params: &AdapterParams) -> Result<Vec<f64>> {
    require_variant(params, params.variant() == Variant::Qlora, "qlora_forward")?;
    forward_one(x, backbone, params)
}

/// Activation or stacked-linear bottleneck variants.
pub fn variant_forward(x: &[f64], backbone: &Backbone, params: &AdapterParams) -> Result<Vec<f64>> {
    require_variant(
        params,
        matches!(params.variant(), Variant::Act(_) | Variant::StackedLinear(_)),
        "variant_forward",
    )?;
    forward_one(x, backbone, params)
}

/// Loss of a single feature vector through the head, with its tape.
pub fn head_loss(h: &[f64], head: &ClassifierHead, label: u8) -> Result<(f64, Tape)> {
    if label > 1 {
        return Err(Error::InvalidInput(format!("label must be 0 or 1, got {label}")));
    }
    let mut tape = Tape::new();
    let hv = tape.constant(Matrix::new(1, h.len(), h.to_vec())?);
    let w = tape.param(head.w.clone());
    let b = tape.param(head.b.clone());
    let hw = tape.matmul(hv, w)?;
    let z = tape.add(hw, b)?;
    let loss = tape.bce_with_logits(z, &[label as f64])?;
    let value = tape.value(loss).data()[0];
    Ok((value, tape))
}

/// Intermediate H-LoRA quantities for one input on the bottleneck axis.
#[derive(Clone, Debug, PartialEq)]
pub struct HloraParts {
    pub bottleneck: Vec<f64>,
    pub envelope: Vec<f64>,
    pub phase: Vec<f64>,
    pub enhanced: Vec<f64>,
}

pub fn hlora_parts(x: &[f64], params: &AdapterParams) -> Result<HloraParts> {
    require_variant(params, params.variant() == Variant::Hlora, "hlora_parts")?;
    let xm = Matrix::new(1, x.len(), x.to_vec())?;
    let xl = xm.matmul(&params.b_down)?.into_data();
    let series = crate::spectral::RealSeries::new(xl.clone())?;
    let xa = crate::spectral::analytic_signal(&series)?;
    let ep = crate::spectral::envelope_and_phase(&xa, params.spec.eps)?;
    let envelope = ep.envelope.into_inner();
    let phase = ep.phase.into_inner();
    let enhanced = xl
        .iter()
        .zip(&envelope)
        .zip(&phase)
        .map(|((a, b), c)| a + b + c)
        .collect();
    Ok(HloraParts {
        bottleneck: xl,
        envelope,
        phase,
        enhanced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: Variant, r: usize) -> AdapterSpec {
        AdapterSpec::new(v, r, 1.0)
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            Variant::Lora,
            Variant::Hlora,
            Variant::Qlora,
            Variant::Act(Activation::Identity),
            Variant::Act(Activation::Tanh),
            Variant::Act(Activation::Sigmoid),
            Variant::Act(Activation::Silu),
            Variant::StackedLinear(3),
        ] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("lora2".parse::<Variant>().is_err());
        assert!("stacked-linear-x".parse::<Variant>().is_err());
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            init_adapter(8, 8, &spec(Variant::Qlora, 3), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            init_adapter(8, 8, &spec(Variant::Hlora, 1), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            init_adapter(8, 8, &spec(Variant::StackedLinear(0), 2), 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            init_adapter(8, 8, &spec(Variant::Lora, 0), 0),
            Err(Error::Config(_))
        ));
        let mut s = spec(Variant::Hlora, 1);
        s.hilbert_axis = HilbertAxis::InputFeature;
        assert!(init_adapter(8, 8, &s, 0).is_ok());
    }

    #[test]
    fn init_bounds_and_determinism() {
        let s = spec(Variant::Hlora, 4);
        let a = init_adapter(16, 8, &s, 7).unwrap();
        let b = init_adapter(16, 8, &s, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.b_down.data().iter().all(|v| v.abs() <= 0.25));
        assert!(a.a_up.data().iter().all(|&v| v == 0.0));
        assert_eq!(a.hlora_scale_value(), 0.25);
        let q = init_adapter(16, 8, &spec(Variant::Qlora, 4), 3).unwrap();
        let angles = q.qnn_angles.unwrap();
        assert_eq!(angles.len(), 24);
        assert!(angles.data().iter().all(|v| v.abs() <= 0.1));
    }

    #[test]
    fn wrong_forward_for_variant() {
        let bb = Backbone::generate(6, 6, 0).unwrap();
        let p = init_adapter(6, 6, &spec(Variant::Hlora, 2), 0).unwrap();
        assert!(matches!(lora_forward(&[0.0; 6], &bb, &p), Err(Error::Config(_))));
        assert!(matches!(hlora_forward(&[0.0; 5], &bb, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn head_loss_reference_points() {
        let head = ClassifierHead::zeros(3);
        for label in [0, 1] {
            let (l, _) = head_loss(&[1.0, 2.0, 3.0], &head, label).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        }
        let head = ClassifierHead {
            w: Matrix::column_vector(vec![0.0, 0.0, 0.0]),
            b: Matrix::scalar(20.0),
        };
        assert!(head_loss(&[1.0, 2.0, 3.0], &head, 1).unwrap().0 < 1e-8);
        assert!(head_loss(&[1.0], &head, 2).is_err());
    }

    #[test]
    fn parameter_counts() {
        let bb = Backbone::generate(64, 64, 0).unwrap();
        let count = |v, r| {
            let mut s = spec(v, r);
            s.qnn_preset = QnnPreset::Table3;
            Model::init(&bb, &s, 0).unwrap().trainable_count()
        };
        let lora = count(Variant::Lora, 4);
        assert_eq!(lora, 64 * 4 * 2 + 65);
        assert_eq!(count(Variant::Hlora, 4) - lora, 1);
        assert_eq!(count(Variant::Qlora, 4) - lora, 24);
        assert_eq!(count(Variant::StackedLinear(2), 4) - lora, 32);
        assert_eq!(count(Variant::Act(Activation::Tanh), 4), lora);
    }
}
