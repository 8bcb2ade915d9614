//! Sweeps over rank, training-set size, and the bottleneck transform.

use serde::{Deserialize, Serialize};

use crate::adapters::Variant;
use crate::config::{DatasetSource, ExperimentConfig};
use crate::error::{Error, Result};
use crate::qsim::NUM_QUBITS;
use crate::tensor::Activation;

use super::protocol::{run_protocol_with_threads, MetricStats};

pub const RANKS: [usize; 3] = [2, 4, 6];
pub const SAMPLE_SIZES: [usize; 5] = [50, 100, 200, 400, 800];
pub const MAIN_VARIANTS: [Variant; 3] = [Variant::Lora, Variant::Hlora, Variant::Qlora];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    Rank,
    Samples,
    Layers,
}

impl std::str::FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank" => Ok(Sweep::Rank),
            "samples" => Ok(Sweep::Samples),
            "layers" => Ok(Sweep::Layers),
            other => Err(Error::Config(format!(
                "unknown sweep {other:?}; expected rank, samples or layers"
            ))),
        }
    }
}

/// Bottleneck variants compared against H-LoRA in the layers sweep.
pub fn layer_variants() -> Vec<Variant> {
    let mut v = vec![
        Variant::Hlora,
        Variant::Lora,
        Variant::Act(Activation::Tanh),
        Variant::Act(Activation::Sigmoid),
        Variant::Act(Activation::Silu),
    ];
    v.extend((1..=5).map(Variant::StackedLinear));
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub variant: Variant,
    pub r: usize,
    pub n_train: Option<usize>,
    /// Why the point was not run, when it was not.
    pub skipped: Option<String>,
    pub mean: Option<MetricStats>,
    pub std: Option<MetricStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub sweep: Sweep,
    pub base_config: ExperimentConfig,
    pub entries: Vec<AblationEntry>,
}

/// One planned point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub config: ExperimentConfig,
    pub skipped: Option<String>,
}

/// Configurations a sweep will run, in report order.
pub fn plan(sweep: Sweep, base: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::new();
    match sweep {
        Sweep::Rank => {
            for &r in &RANKS {
                for &v in &MAIN_VARIANTS {
                    let skipped = (v == Variant::Qlora && r != NUM_QUBITS)
                        .then(|| format!("qlora has a fixed {NUM_QUBITS}-qubit bottleneck (r = {NUM_QUBITS})"));
                    points.push(SweepPoint {
                        config: base.with_variant(v, r),
                        skipped,
                    });
                }
            }
        }
        Sweep::Samples => {
            if !matches!(base.dataset, DatasetSource::Synthetic(_)) {
                return Err(Error::Config("the samples sweep needs a synthetic dataset".into()));
            }
            for &n in &SAMPLE_SIZES {
                for &v in &MAIN_VARIANTS {
                    let r = if v == Variant::Qlora {
                        NUM_QUBITS
                    } else {
                        base.adapter.r
                    };
                    points.push(SweepPoint {
                        config: base.with_variant(v, r).with_n_train(n),
                        skipped: None,
                    });
                }
            }
        }
        Sweep::Layers => {
            for v in layer_variants() {
                points.push(SweepPoint {
                    config: base.with_variant(v, base.adapter.r),
                    skipped: None,
                });
            }
        }
    }
    Ok(points)
}

pub fn run_ablation(sweep: Sweep, base: &ExperimentConfig, threads: usize) -> Result<AblationReport> {
    let mut entries = Vec::new();
    for point in plan(sweep, base)? {
        let cfg = &point.config;
        let n_train = cfg.synthetic_spec().map(|s| s.n_train);
        let (mean, std) = if point.skipped.is_some() {
            (None, None)
        } else {
            let s = run_protocol_with_threads(cfg, threads)?;
            (Some(s.mean), Some(s.std))
        };
        entries.push(AblationEntry {
            variant: cfg.adapter.variant,
            r: cfg.adapter.r,
            n_train,
            skipped: point.skipped,
            mean,
            std,
        });
    }
    Ok(AblationReport {
        sweep,
        base_config: base.clone(),
        entries,
    })
}
