//! Experiment configuration files.
//!
//! Every section and key is optional except `adapter.variant`; unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::AdapterSpec;
use crate::error::{Error, Result};
use crate::fewshot::{DatasetSpec, TrainConfig};

/// CSV feature files in `label,f0,...` layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub train: PathBuf,
    pub test: PathBuf,
    /// Balanced subsample drawn per seed; the whole pool when absent.
    #[serde(default)]
    pub n_train: Option<usize>,
}

/// Exactly one data source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(DatasetSpec),
    Csv(CsvSource),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(DatasetSpec::default())
    }
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seed of the frozen backbone; shared by every trial.
    #[serde(default)]
    pub backbone_seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            seeds: default_seeds(),
            backbone_seed: 0,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetSource,
    pub adapter: AdapterSpec,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn new(adapter: AdapterSpec) -> Self {
        ExperimentConfig {
            dataset: DatasetSource::default(),
            adapter,
            training: TrainConfig::default(),
            protocol: ProtocolConfig::default(),
            output: default_output(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Error::Config(inner.to_string())
            } else {
                Error::Config(format!("{path}: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The shipped acceptance setting: weak phase signal, LoRA baseline in
    /// the 70-90% accuracy band at r = 8 and 200 training samples.
    pub fn acceptance() -> Self {
        let dataset = DatasetSpec {
            d: 64,
            n_train: 200,
            n_test: 1000,
            tone_indices: vec![5, 13, 21],
            phase_gap: 0.2,
            noise_sigma: 0.8,
            mixing_seed: 0,
            sample_seed: 0,
        };
        ExperimentConfig {
            dataset: DatasetSource::Synthetic(dataset),
            adapter: AdapterSpec::new(crate::adapters::Variant::Hlora, 8, 1.0),
            training: TrainConfig::default(),
            protocol: ProtocolConfig::default(),
            output: PathBuf::from("results/acceptance"),
        }
    }

    /// Same config with a different adapter variant and rank.
    pub fn with_variant(&self, variant: crate::adapters::Variant, r: usize) -> Self {
        let mut cfg = self.clone();
        cfg.adapter.variant = variant;
        cfg.adapter.r = r;
        cfg
    }

    /// Same config with a different synthetic training-set size.
    pub fn with_n_train(&self, n_train: usize) -> Self {
        let mut cfg = self.clone();
        match &mut cfg.dataset {
            DatasetSource::Synthetic(spec) => spec.n_train = n_train,
            DatasetSource::Csv(csv) => csv.n_train = Some(n_train),
        }
        cfg
    }

    /// Checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        self.training.validate()?;
        if self.protocol.seeds.is_empty() {
            return Err(Error::Config("protocol.seeds must not be empty".into()));
        }
        Ok(())
    }

    /// Input feature width when it is known without reading files.
    pub fn synthetic_spec(&self) -> Option<&DatasetSpec> {
        match &self.dataset {
            DatasetSource::Synthetic(s) => Some(s),
            DatasetSource::Csv(_) => None,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{HilbertAxis, Variant};
    use crate::qsim::{Encoding, QnnPreset};

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json_str(r#"{"adapter":{"variant":"lora"}}"#).unwrap();
        assert_eq!(cfg.adapter.variant, Variant::Lora);
        assert_eq!(cfg.adapter.r, 4);
        assert_eq!(cfg.adapter.alpha, 1.0);
        assert_eq!(cfg.adapter.hilbert_axis, HilbertAxis::Bottleneck);
        assert_eq!(cfg.adapter.qnn_preset, QnnPreset::Table3);
        assert_eq!(cfg.adapter.qnn_encoding, Encoding::Raw);
        assert!(!cfg.adapter.qlora_residual);
        assert_eq!(cfg.training, TrainConfig::default());
        assert_eq!(cfg.training.epochs, 20);
        assert_eq!(cfg.training.batch_size, 16);
        assert_eq!(cfg.training.learning_rate, 5e-4);
        assert_eq!(cfg.protocol.seeds, (0..10).collect::<Vec<_>>());
        assert_eq!(cfg.dataset, DatasetSource::Synthetic(DatasetSpec::default()));
        assert_eq!(cfg.output, PathBuf::from("results"));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_json_str(r#"{"adapter":{"vairant":"lora"}}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("vairant"), "{err}");
        let err = ExperimentConfig::from_json_str(r#"{"adapter":{"variant":"lora"},"extra":1}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn type_mismatch_names_key_and_type() {
        let err = ExperimentConfig::from_json_str(r#"{"adapter":{"variant":"lora"},"training":{"epochs":"many"}}"#)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("training.epochs"), "{msg}");
        assert!(msg.contains("usize") || msg.contains("integer"), "{msg}");
    }

    #[test]
    fn two_dataset_sources_rejected() {
        let text = r#"{"adapter":{"variant":"lora"},
            "dataset":{"synthetic":{},"csv":{"train":"a","test":"b"}}}"#;
        assert!(ExperimentConfig::from_json_str(text).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(parse_config("/nonexistent/cfg.json"), Err(Error::Io { .. })));
    }

    #[test]
    fn shipped_preset_matches_acceptance() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../presets/acceptance.json");
        assert_eq!(parse_config(path).unwrap(), ExperimentConfig::acceptance());
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::new(AdapterSpec::new(Variant::Hlora, 8, 1.0));
        let back = ExperimentConfig::from_json_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
    }
}
