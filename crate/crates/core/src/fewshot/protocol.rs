//! Seeded multi-trial protocol and its aggregate report.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapters::Backbone;
use crate::config::{CsvSource, DatasetSource, ExperimentConfig};
use crate::error::{Error, Result};

use super::data::{load_csv, SyntheticTask};
use super::train::{train_trial, TrialResult};
use super::Dataset;

/// Mean or standard deviation of each reported quantity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub auc: f64,
    pub acc: f64,
    pub pr: f64,
    pub re: f64,
    pub f1: f64,
    pub eer: f64,
    pub epoch_seconds: f64,
    pub inference_seconds: f64,
    pub trainable_params: f64,
}

impl MetricStats {
    fn from_trial(t: &TrialResult) -> Self {
        MetricStats {
            auc: t.auc,
            acc: t.acc,
            pr: t.pr,
            re: t.re,
            f1: t.f1,
            eer: t.eer,
            epoch_seconds: t.mean_epoch_seconds(),
            inference_seconds: t.inference_seconds,
            trainable_params: t.trainable_params as f64,
        }
    }

    fn fields(&self) -> [f64; 9] {
        [
            self.auc,
            self.acc,
            self.pr,
            self.re,
            self.f1,
            self.eer,
            self.epoch_seconds,
            self.inference_seconds,
            self.trainable_params,
        ]
    }

    fn from_fields(f: [f64; 9]) -> Self {
        MetricStats {
            auc: f[0],
            acc: f[1],
            pr: f[2],
            re: f[3],
            f1: f[4],
            eer: f[5],
            epoch_seconds: f[6],
            inference_seconds: f[7],
            trainable_params: f[8],
        }
    }
}

/// Mean and sample standard deviation (`n - 1` denominator, zero for a single
/// value) of each field.
pub fn aggregate(values: &[MetricStats]) -> (MetricStats, MetricStats) {
    let n = values.len();
    if n == 0 {
        return (MetricStats::default(), MetricStats::default());
    }
    let mut mean = [0.0; 9];
    for v in values {
        for (m, x) in mean.iter_mut().zip(v.fields()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut std = [0.0; 9];
    if n > 1 {
        for v in values {
            for ((s, x), m) in std.iter_mut().zip(v.fields()).zip(mean) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut std {
            *s = (*s / (n - 1) as f64).sqrt();
        }
    }
    (MetricStats::from_fields(mean), MetricStats::from_fields(std))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub config_echo: ExperimentConfig,
    pub per_seed: Vec<TrialResult>,
    pub mean: MetricStats,
    pub std: MetricStats,
}

impl ProtocolSummary {
    pub fn from_trials(config: &ExperimentConfig, per_seed: Vec<TrialResult>) -> Self {
        let stats: Vec<MetricStats> = per_seed.iter().map(MetricStats::from_trial).collect();
        let (mean, std) = aggregate(&stats);
        ProtocolSummary {
            config_echo: config.clone(),
            per_seed,
            mean,
            std,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Copy with every wall-clock field zeroed, for run-to-run comparison.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.per_seed {
            t.epoch_seconds.iter_mut().for_each(|s| *s = 0.0);
            t.inference_seconds = 0.0;
        }
        for m in [&mut out.mean, &mut out.std] {
            m.epoch_seconds = 0.0;
            m.inference_seconds = 0.0;
        }
        out
    }
}

enum TrainSource {
    Synthetic { task: SyntheticTask, n_train: usize },
    Pool { pool: Dataset, n_train: Option<usize> },
}

/// Backbone, fixed test set, and the per-seed training draw for a config.
pub struct PreparedData {
    pub backbone: Backbone,
    pub test: Dataset,
    source: TrainSource,
}

impl PreparedData {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let (source, test) = match &cfg.dataset {
            DatasetSource::Synthetic(spec) => {
                let task = SyntheticTask::new(spec)?;
                let test = task.test_set(spec.n_test, spec.sample_seed)?;
                (
                    TrainSource::Synthetic {
                        task,
                        n_train: spec.n_train,
                    },
                    test,
                )
            }
            DatasetSource::Csv(CsvSource { train, test, n_train }) => {
                let pool = load_csv(train)?;
                let test = load_csv(test)?;
                if pool.dim() != test.dim() {
                    return Err(Error::Config(format!(
                        "train features have width {}, test features {}",
                        pool.dim(),
                        test.dim()
                    )));
                }
                if let Some(n) = n_train {
                    if *n == 0 || n % 2 != 0 || n / 2 > pool.count_label(0) || n / 2 > pool.count_label(1) {
                        return Err(Error::Config(format!(
                            "n_train = {n} needs to be even and at most twice the smaller class of the pool"
                        )));
                    }
                }
                (
                    TrainSource::Pool {
                        pool,
                        n_train: *n_train,
                    },
                    test,
                )
            }
        };
        let d = test.dim();
        let backbone = Backbone::generate(d, d, cfg.protocol.backbone_seed)?;
        Ok(PreparedData { backbone, test, source })
    }

    /// Fresh training set for a trial seed.
    pub fn train_set(&self, seed: u64) -> Result<Dataset> {
        match &self.source {
            TrainSource::Synthetic { task, n_train } => task.train_set(*n_train, seed),
            TrainSource::Pool { pool, n_train } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut idx = Vec::new();
                for label in [0u8, 1] {
                    let mut members: Vec<usize> = (0..pool.len()).filter(|&i| pool.labels[i] == label).collect();
                    members.shuffle(&mut rng);
                    match n_train {
                        Some(n) => idx.extend_from_slice(&members[..n / 2]),
                        None => idx.extend(members),
                    }
                }
                idx.shuffle(&mut rng);
                Ok(pool.subset(&idx))
            }
        }
    }
}

/// Threads used when nothing else is requested: one per seed.
pub fn default_threads(cfg: &ExperimentConfig) -> usize {
    cfg.protocol.seeds.len().max(1)
}

/// Runs every seed of the protocol on at most `threads` workers. Results are
/// collected in seed-list order.
pub fn run_protocol_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ProtocolSummary> {
    let data = PreparedData::new(cfg)?;
    let trials = run_trials(cfg, &data, threads)?;
    Ok(ProtocolSummary::from_trials(cfg, trials))
}

pub fn run_protocol(cfg: &ExperimentConfig) -> Result<ProtocolSummary> {
    run_protocol_with_threads(cfg, default_threads(cfg))
}

pub(crate) fn run_trials(cfg: &ExperimentConfig, data: &PreparedData, threads: usize) -> Result<Vec<TrialResult>> {
    cfg.adapter.validate(data.backbone.d_in(), data.backbone.d_out())?;
    let run_one = |&seed: &u64| -> Result<TrialResult> {
        let attribute = |e| Error::Trial {
            seed,
            source: Box::new(e),
        };
        let train = data.train_set(seed).map_err(attribute)?;
        train_trial(&cfg.adapter, &cfg.training, &data.backbone, &train, &data.test, seed).map_err(attribute)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<TrialResult>> = pool.install(|| cfg.protocol.seeds.par_iter().map(run_one).collect());
    results.into_iter().collect()
}

/// `epoch,loss` rows, epochs counted from 1.
pub fn write_loss_csv(path: impl AsRef<Path>, trace: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "epoch,loss").map_err(io)?;
    for (i, l) in trace.iter().enumerate() {
        writeln!(w, "{},{l:.16e}", i + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}
