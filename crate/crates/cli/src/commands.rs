use std::fs;
use std::path::{Path, PathBuf};

use phaselab_core::adapters::{forward_batch, Variant};
use phaselab_core::config::{parse_config, DatasetSource};
use phaselab_core::fewshot::ablation::{run_ablation, Sweep};
use phaselab_core::fewshot::protocol::PreparedData;
use phaselab_core::fewshot::{
    bench_timing, default_threads, gen_synthetic, run_protocol_with_threads, train_model, train_trial, write_csv,
    write_loss_csv, BenchOptions, Dataset,
};
use phaselab_core::{selftest as checks, Error, ExperimentConfig, Result};
use serde::Serialize;

use crate::Common;

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::acceptance(),
    };
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    if let DatasetSource::Csv(csv) = &cfg.dataset {
        for p in [&csv.train, &csv.test] {
            if !p.exists() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    Ok(&cfg.output)
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn threads(cfg: &ExperimentConfig) -> Result<usize> {
    match std::env::var("PHASELAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!(
                "PHASELAB_THREADS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(default_threads(cfg)),
    }
}

fn trial_seed(cfg: &ExperimentConfig, seed: Option<u64>) -> u64 {
    seed.or_else(|| cfg.protocol.seeds.first().copied()).unwrap_or(0)
}

pub fn gen_data(common: &Common, seed: Option<u64>) -> Result<()> {
    let cfg = load(common)?;
    let DatasetSource::Synthetic(mut spec) = cfg.dataset.clone() else {
        return Err(Error::Config("gen-data needs a synthetic dataset".into()));
    };
    if let Some(s) = seed {
        spec.sample_seed = s;
    }
    let data = gen_synthetic(&spec)?;
    let dir = out_dir(&cfg)?;
    for (name, set) in [("train.csv", &data.train), ("test.csv", &data.test)] {
        let path = dir.join(name);
        write_csv(&path, set)?;
        println!("wrote {} ({} rows)", path.display(), set.len());
    }
    Ok(())
}

pub fn train(common: &Common, seed: Option<u64>) -> Result<()> {
    let cfg = load(common)?;
    let seed = trial_seed(&cfg, seed);
    let data = PreparedData::new(&cfg)?;
    cfg.adapter.validate(data.backbone.d_in(), data.backbone.d_out())?;
    let train = data.train_set(seed)?;
    let trial = train_trial(&cfg.adapter, &cfg.training, &data.backbone, &train, &data.test, seed)?;
    let dir = out_dir(&cfg)?;
    write_loss_csv(dir.join(format!("loss_seed{seed}.csv")), &trial.loss_trace)?;
    println!(
        "{} seed {seed}: acc {:.4} auc {:.4} f1 {:.4} eer {:.4}",
        cfg.adapter.variant, trial.acc, trial.auc, trial.f1, trial.eer
    );
    write_json(dir.join(format!("trial_seed{seed}.json")), &trial)
}

pub fn protocol(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let summary = run_protocol_with_threads(&cfg, threads(&cfg)?)?;
    let dir = out_dir(&cfg)?;
    for t in &summary.per_seed {
        write_loss_csv(dir.join(format!("loss_seed{}.csv", t.seed)), &t.loss_trace)?;
    }
    println!(
        "{}: acc {:.4} +- {:.4}  auc {:.4} +- {:.4}  over {} seeds",
        cfg.adapter.variant,
        summary.mean.acc,
        summary.std.acc,
        summary.mean.auc,
        summary.std.auc,
        summary.per_seed.len()
    );
    write_json(dir.join("results.json"), &summary)
}

pub fn ablate(common: &Common, sweep: &str) -> Result<()> {
    let cfg = load(common)?;
    let sweep: Sweep = sweep.parse()?;
    let report = run_ablation(sweep, &cfg, threads(&cfg)?)?;
    for e in &report.entries {
        match (&e.mean, &e.skipped) {
            (Some(m), _) => println!(
                "{:<18} r={} n={:<4} acc {:.4} auc {:.4}",
                e.variant.to_string(),
                e.r,
                e.n_train.map_or("-".into(), |n| n.to_string()),
                m.acc,
                m.auc
            ),
            (None, Some(why)) => println!("{:<18} r={} skipped: {why}", e.variant.to_string(), e.r),
            (None, None) => {}
        }
    }
    let name = format!("ablation_{}.json", sweep_name(sweep));
    write_json(out_dir(&cfg)?.join(name), &report)
}

fn sweep_name(sweep: Sweep) -> &'static str {
    match sweep {
        Sweep::Rank => "rank",
        Sweep::Samples => "samples",
        Sweep::Layers => "layers",
    }
}

pub fn bench(common: &Common, variants: &[String], epochs: usize, calls: usize) -> Result<()> {
    let cfg = load(common)?;
    let opts = BenchOptions {
        timed_epochs: epochs,
        inference_calls: calls,
    };
    let variants: Vec<Variant> = if variants.is_empty() {
        vec![cfg.adapter.variant]
    } else {
        variants.iter().map(|v| v.parse()).collect::<Result<_>>()?
    };
    let mut reports = Vec::new();
    for v in variants {
        let r = if v == Variant::Qlora { 4 } else { cfg.adapter.r };
        let report = bench_timing(&cfg.with_variant(v, r), opts)?;
        println!(
            "{:<18} r={} epoch {:.4e} s  inference {:.4e} s  params {} (+{} vs lora)",
            report.variant.to_string(),
            report.r,
            report.epoch_seconds,
            report.inference_seconds,
            report.trainable_params,
            report.extra_params_vs_lora
        );
        for note in &report.notes {
            println!("  note: {note}");
        }
        reports.push(report);
    }
    write_json(out_dir(&cfg)?.join("timing.json"), &reports)
}

/// Bottleneck and adapter output of every test row, labelled, in the same
/// CSV layout `load_csv` reads.
pub fn embed(common: &Common, seed: Option<u64>) -> Result<()> {
    let cfg = load(common)?;
    let seed = trial_seed(&cfg, seed);
    let data = PreparedData::new(&cfg)?;
    cfg.adapter.validate(data.backbone.d_in(), data.backbone.d_out())?;
    let train = data.train_set(seed)?;
    let model = train_model(&cfg.adapter, &cfg.training, &data.backbone, &train, seed)?;
    let fwd = forward_batch(&data.test.features, &data.backbone, &model.adapter)?;
    let dir = out_dir(&cfg)?;
    for (name, features) in [
        ("embed_bottleneck.csv", fwd.bottleneck),
        ("embed_output.csv", fwd.output),
    ] {
        let path = dir.join(name);
        write_csv(&path, &Dataset::new(features, data.test.labels.clone())?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn selftest() -> Result<()> {
    let results = checks::run();
    for c in &results {
        println!("{c}");
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        println!("all {} checks passed", results.len());
        Ok(())
    } else {
        Err(Error::Contract(format!("{failed} of {} checks failed", results.len())))
    }
}
