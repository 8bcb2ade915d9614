//! Dense matrices and a small reverse-mode differentiation tape over the
//! closed set of operations the adapters need.

mod matrix;
mod tape;

pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var};

use serde::{Deserialize, Serialize};

/// Elementwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    Silu,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Silu => x * sigmoid(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Silu => {
                let s = sigmoid(x);
                s * (1.0 + x * (1.0 - s))
            }
        }
    }
}

/// Numerically stable binary cross-entropy on a logit.
pub fn bce_with_logits(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_reference_points() {
        assert!((bce_with_logits(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_with_logits(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_with_logits(20.0, 1.0) < 1e-8);
        assert!(bce_with_logits(-800.0, 0.0).is_finite());
        assert!((bce_with_logits(-800.0, 1.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn activation_derivatives_match_differences() {
        for act in [
            Activation::Identity,
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Silu,
        ] {
            for &x in &[-3.0, -0.4, 0.0, 0.9, 2.5] {
                let h = 1e-6;
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert!((fd - act.derivative(x)).abs() < 1e-8, "{act:?} at {x}");
            }
        }
    }
}
