use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterSpec, Backbone, Model};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::tensor::sigmoid;

use super::metrics::{compute_auc, compute_eer, compute_threshold_metrics};
use super::Dataset;

fn default_epochs() -> usize {
    20
}
fn default_batch() -> usize {
    16
}
fn default_lr() -> f64 {
    5e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

/// Optimization settings. The optimizer is always Adam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            adam_eps: default_adam_eps(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::Config("adam_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one seeded training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    /// Mean training loss per epoch.
    pub loss_trace: Vec<f64>,
    pub auc: f64,
    pub acc: f64,
    pub pr: f64,
    pub re: f64,
    pub f1: f64,
    pub eer: f64,
    pub eer_threshold: f64,
    pub pr_undefined: bool,
    /// Wall seconds of each epoch.
    pub epoch_seconds: Vec<f64>,
    /// Wall seconds per test sample.
    pub inference_seconds: f64,
    pub trainable_params: usize,
}

impl TrialResult {
    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.epoch_seconds.is_empty() {
            0.0
        } else {
            self.epoch_seconds.iter().sum::<f64>() / self.epoch_seconds.len() as f64
        }
    }
}

/// Test-set metrics for an already trained model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub auc: f64,
    pub acc: f64,
    pub pr: f64,
    pub re: f64,
    pub f1: f64,
    pub eer: f64,
    pub eer_threshold: f64,
    pub pr_undefined: bool,
}

pub fn evaluate(model: &Model, backbone: &Backbone, test: &Dataset) -> Result<Evaluation> {
    let logits = model.logits(&test.features, backbone)?;
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidInput("non-finite logit on the test set".into()));
    }
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    let auc = compute_auc(&probs, &test.labels)?;
    let t = compute_threshold_metrics(&probs, &test.labels, 0.5)?;
    let (eer, eer_threshold) = compute_eer(&probs, &test.labels)?;
    Ok(Evaluation {
        auc,
        acc: t.acc,
        pr: t.pr,
        re: t.re,
        f1: t.f1,
        eer,
        eer_threshold,
        pr_undefined: t.pr_undefined,
    })
}

/// Runs one epoch over `order` in mini-batches. Returns the sample-weighted
/// mean loss.
pub(crate) fn run_epoch(
    model: &mut Model,
    backbone: &Backbone,
    train: &Dataset,
    order: &[usize],
    batch_size: usize,
    opt: &mut Adam,
) -> Result<f64> {
    let mut total = 0.0;
    for batch in order.chunks(batch_size) {
        let xb = train.features.select_rows(batch);
        let yb: Vec<f64> = batch.iter().map(|&i| train.labels[i] as f64).collect();

        let (loss, g) = model.loss_and_grads(&xb, &yb, backbone)?;
        total += loss * batch.len() as f64;
        opt.step(&mut model.parameters_mut(), &g);
    }
    Ok(total / order.len() as f64)
}

struct Fitted {
    model: Model,
    loss_trace: Vec<f64>,
    epoch_seconds: Vec<f64>,
}

fn fit(spec: &AdapterSpec, cfg: &TrainConfig, backbone: &Backbone, train: &Dataset, seed: u64) -> Result<Fitted> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut model = Model::init(backbone, spec, seed)?;
    let mut opt = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut epoch_seconds = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let loss = run_epoch(&mut model, backbone, train, &order, cfg.batch_size, &mut opt)?;
        epoch_seconds.push(start.elapsed().as_secs_f64());
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        loss_trace.push(loss);
    }
    Ok(Fitted {
        model,
        loss_trace,
        epoch_seconds,
    })
}

/// Trains adapter and head on `train` with the backbone frozen, then scores
/// `test`. Initialization and shuffling derive from `seed`.
pub fn train_trial(
    spec: &AdapterSpec,
    cfg: &TrainConfig,
    backbone: &Backbone,
    train: &Dataset,
    test: &Dataset,
    seed: u64,
) -> Result<TrialResult> {
    let fitted = fit(spec, cfg, backbone, train, seed)?;
    let trainable_params = fitted.model.trainable_count();

    let start = Instant::now();
    let eval = evaluate(&fitted.model, backbone, test)?;
    let inference_seconds = start.elapsed().as_secs_f64() / test.len() as f64;

    Ok(TrialResult {
        seed,
        loss_trace: fitted.loss_trace,
        auc: eval.auc,
        acc: eval.acc,
        pr: eval.pr,
        re: eval.re,
        f1: eval.f1,
        eer: eval.eer,
        eer_threshold: eval.eer_threshold,
        pr_undefined: eval.pr_undefined,
        epoch_seconds: fitted.epoch_seconds,
        inference_seconds,
        trainable_params,
    })
}

/// As [`train_trial`] but returns the trained model instead of metrics.
pub fn train_model(
    spec: &AdapterSpec,
    cfg: &TrainConfig,
    backbone: &Backbone,
    train: &Dataset,
    seed: u64,
) -> Result<Model> {
    Ok(fit(spec, cfg, backbone, train, seed)?.model)
}
