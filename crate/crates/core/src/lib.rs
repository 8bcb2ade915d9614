//! Low-rank adapters for frozen linear backbones: plain LoRA, a
//! Hilbert-transform variant that augments the bottleneck with the envelope
//! and phase of its analytic signal, and a variant that routes the bottleneck
//! through a simulated four-qubit circuit. Includes the spectral, tensor and
//! statevector machinery they rest on and a seeded few-shot evaluation
//! harness.

pub mod adapters;
pub mod config;
pub mod error;
pub mod fewshot;
pub mod optim;
pub mod oracle;
pub mod qsim;
pub mod selftest;
pub mod spectral;
pub mod tensor;

pub use adapters::{AdapterParams, AdapterSpec, Backbone, ClassifierHead, HilbertAxis, Model, Variant};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use fewshot::{Dataset, DatasetSpec, ProtocolSummary, TrialResult};
pub use qsim::{CircuitSpec, Encoding, QnnPreset};
pub use spectral::{ComplexSeries, EnvelopePhase, RealSeries};
pub use tensor::{Activation, Matrix, Tape, Var};
