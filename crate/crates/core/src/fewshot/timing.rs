//! Wall-clock cost of training and inference per adapter variant.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterSpec, Model, Variant};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::optim::Adam;

use super::protocol::PreparedData;
use super::train::run_epoch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchOptions {
    /// Timed epochs after one untimed warm-up epoch.
    pub timed_epochs: usize,
    /// Timed single-sample forward passes.
    pub inference_calls: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            timed_epochs: 3,
            inference_calls: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub variant: Variant,
    pub r: usize,
    pub n_train: usize,
    /// Median wall seconds per training epoch.
    pub epoch_seconds: f64,
    /// Median wall seconds per single-sample forward pass.
    pub inference_seconds: f64,
    /// Adapter plus head.
    pub trainable_params: usize,
    /// Trainable parameters beyond a plain LoRA adapter of the same rank.
    pub extra_params_vs_lora: usize,
    pub notes: Vec<String>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times the configured adapter on the first protocol seed's training draw.
pub fn bench_timing(cfg: &ExperimentConfig, opts: BenchOptions) -> Result<TimingReport> {
    let data = PreparedData::new(cfg)?;
    bench_prepared(cfg, &data, opts)
}

pub fn bench_prepared(cfg: &ExperimentConfig, data: &PreparedData, opts: BenchOptions) -> Result<TimingReport> {
    let seed = cfg.protocol.seeds.first().copied().unwrap_or(0);
    let train = data.train_set(seed)?;
    let backbone = &data.backbone;
    let spec = &cfg.adapter;

    let mut model = Model::init(backbone, spec, seed)?;
    let lora_spec = AdapterSpec {
        variant: Variant::Lora,
        ..spec.clone()
    };
    let lora_count = Model::init(backbone, &lora_spec, seed)?.trainable_count();
    let trainable_params = model.trainable_count();

    let t = &cfg.training;
    let mut opt = Adam::new(t.learning_rate, t.beta1, t.beta2, t.adam_eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut epochs = Vec::with_capacity(opts.timed_epochs);
    for i in 0..=opts.timed_epochs.max(1) {
        order.shuffle(&mut rng);
        let start = Instant::now();
        run_epoch(&mut model, backbone, &train, &order, t.batch_size, &mut opt)?;
        if i > 0 {
            epochs.push(start.elapsed().as_secs_f64());
        }
    }

    let mut calls = Vec::with_capacity(opts.inference_calls);
    for i in 0..opts.inference_calls.max(1) {
        let row = data.test.features.select_rows(&[i % data.test.len()]);
        let start = Instant::now();
        let z = model.logits(&row, backbone)?;
        calls.push(start.elapsed().as_secs_f64());
        std::hint::black_box(z);
    }

    let mut notes = Vec::new();
    if spec.variant == Variant::Hlora {
        notes.push(
            "hlora counts its learnable output scale as 1 extra trainable parameter; \
             accountings that treat the scale as a hyperparameter report 0"
                .to_string(),
        );
    }

    Ok(TimingReport {
        variant: spec.variant,
        r: spec.r,
        n_train: train.len(),
        epoch_seconds: median(epochs),
        inference_seconds: median(calls),
        trainable_params,
        extra_params_vs_lora: trainable_params - lora_count,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::median;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
