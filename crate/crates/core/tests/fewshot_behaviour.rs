use std::io::Write;

use phaselab_core::config::{CsvSource, DatasetSource};
use phaselab_core::fewshot::{
    aggregate, gen_synthetic, load_csv, run_protocol, run_protocol_with_threads, train_trial, write_csv, Dataset,
    DatasetSpec, MetricStats, SyntheticTask, TrainConfig,
};
use phaselab_core::spectral::{dft, RealSeries};
use phaselab_core::{AdapterSpec, Backbone, Error, ExperimentConfig, Matrix, Variant};

fn small_spec() -> DatasetSpec {
    DatasetSpec {
        d: 16,
        n_train: 40,
        n_test: 60,
        tone_indices: vec![2, 5],
        ..DatasetSpec::default()
    }
}

fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::File::create(&path)
        .unwrap()
        .write_all(body.as_bytes())
        .unwrap();
    path
}

#[test]
fn generation_is_deterministic_and_balanced() {
    let a = gen_synthetic(&small_spec()).unwrap();
    let b = gen_synthetic(&small_spec()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.train.count_label(0), 20);
    assert_eq!(a.train.count_label(1), 20);
    assert_eq!(a.test.count_label(1), 30);
    let other = gen_synthetic(&DatasetSpec {
        sample_seed: 1,
        ..small_spec()
    })
    .unwrap();
    assert_ne!(a.train, other.train);
}

#[test]
fn mixing_matrix_is_orthogonal() {
    let task = SyntheticTask::new(&DatasetSpec::default()).unwrap();
    let m = task.mixing();
    let gram = m.t_matmul(m).unwrap();
    assert!(gram.max_abs_diff(&Matrix::identity(m.rows())) < 1e-12);
}

#[test]
fn classes_share_their_magnitude_spectrum() {
    let spec = DatasetSpec::default();
    let task = SyntheticTask::new(&spec).unwrap();
    let (latent, labels) = task.sample_latent(1000, 7, 1).unwrap();
    let mut mean_mag = vec![vec![0.0; spec.d]; 2];
    for (r, &c) in labels.iter().enumerate() {
        let x = RealSeries::new(latent.row(r).to_vec()).unwrap();
        for (k, v) in dft(&x.to_complex()).values().iter().enumerate() {
            mean_mag[c as usize][k] += v.norm() / 500.0;
        }
    }
    for &k in &spec.tone_indices {
        let (m0, m1) = (mean_mag[0][k], mean_mag[1][k]);
        assert!((m0 - m1).abs() / m0.max(m1) < 0.05, "bin {k}: {m0} vs {m1}");
    }
}

#[test]
fn bad_tone_index_is_config_error() {
    for tones in [vec![0], vec![8], vec![3, 9]] {
        let spec = DatasetSpec {
            tone_indices: tones,
            ..small_spec()
        };
        assert!(matches!(gen_synthetic(&spec), Err(Error::Config(_))));
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_synthetic(&small_spec()).unwrap().train;
    let path = dir.path().join("train.csv");
    write_csv(&path, &data).unwrap();
    assert_eq!(load_csv(&path).unwrap(), data);

    let two = Dataset::new(
        Matrix::new(2, 2, vec![0.1, -2.5e-7, 1.0 / 3.0, 1e300]).unwrap(),
        vec![1, 0],
    )
    .unwrap();
    write_csv(&path, &two).unwrap();
    assert_eq!(load_csv(&path).unwrap(), two);
}

#[test]
fn csv_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("ragged.csv", "label,f0,f1\n0,1.0,2.0\n1,3.0\n", 3),
        ("text.csv", "label,f0,f1\n0,1.0,2.0\n1,3.0,2.0\n0,abc,1.0\n", 4),
        ("label.csv", "label,f0\n2,1.0\n", 2),
    ];
    for (name, body, line) in cases {
        let path = write_file(&dir, name, body);
        match load_csv(&path) {
            Err(Error::Parse { line: got, .. }) => assert_eq!(got, line, "{name}"),
            other => panic!("{name}: {other:?}"),
        }
    }
    assert!(matches!(
        load_csv(dir.path().join("missing.csv")),
        Err(Error::Io { .. })
    ));
}

fn default_run(variant: Variant, epochs: usize, seed: u64) -> phaselab_core::TrialResult {
    let spec = DatasetSpec::default();
    let task = SyntheticTask::new(&spec).unwrap();
    let train = task.train_set(spec.n_train, seed).unwrap();
    let test = task.test_set(spec.n_test, spec.sample_seed).unwrap();
    let backbone = Backbone::generate(spec.d, spec.d, 0).unwrap();
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    train_trial(&AdapterSpec::new(variant, 4, 1.0), &cfg, &backbone, &train, &test, seed).unwrap()
}

/// A random head on well separated classes can score anywhere in [0, 1] for
/// one seed; averaged over seeds it is at chance.
#[test]
fn untrained_models_sit_near_chance() {
    let aucs: Vec<f64> = (0..10)
        .map(|seed| {
            let r = default_run(Variant::Lora, 0, seed);
            assert!(r.loss_trace.is_empty());
            r.auc
        })
        .collect();
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    assert!((0.3..=0.7).contains(&mean), "mean auc {mean} from {aucs:?}");
}

#[test]
fn lora_training_reduces_loss() {
    let r = default_run(Variant::Lora, 20, 0);
    assert_eq!(r.loss_trace.len(), 20);
    assert!(r.loss_trace.iter().all(|l| l.is_finite()));
    assert!(r.loss_trace.last().unwrap() < r.loss_trace.first().unwrap());
}

#[test]
fn trials_are_deterministic() {
    let a = default_run(Variant::Hlora, 3, 4);
    let b = default_run(Variant::Hlora, 3, 4);
    assert_eq!(a.loss_trace, b.loss_trace);
    assert_eq!((a.auc, a.acc, a.eer, a.f1), (b.auc, b.acc, b.eer, b.f1));
}

#[test]
fn huge_learning_rate_reports_divergence() {
    let spec = small_spec();
    let task = SyntheticTask::new(&spec).unwrap();
    let train = task.train_set(spec.n_train, 0).unwrap();
    let test = task.test_set(spec.n_test, 0).unwrap();
    let backbone = Backbone::generate(spec.d, spec.d, 0).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        learning_rate: 1e300,
        ..TrainConfig::default()
    };
    let err = train_trial(
        &AdapterSpec::new(Variant::Lora, 4, 1.0),
        &cfg,
        &backbone,
        &train,
        &test,
        0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Diverged { .. }), "{err:?}");
}

fn small_config(variant: Variant, seeds: Vec<u64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(AdapterSpec::new(variant, 4, 1.0));
    cfg.dataset = DatasetSource::Synthetic(small_spec());
    cfg.training.epochs = 3;
    cfg.protocol.seeds = seeds;
    cfg
}

#[test]
fn single_seed_summary_is_the_trial() {
    let s = run_protocol(&small_config(Variant::Lora, vec![3])).unwrap();
    assert_eq!(s.per_seed.len(), 1);
    let t = &s.per_seed[0];
    assert_eq!((s.mean.acc, s.mean.auc, s.mean.eer), (t.acc, t.auc, t.eer));
    assert_eq!(s.std.acc, 0.0);
    assert_eq!(s.std.auc, 0.0);
}

#[test]
fn aggregate_matches_hand_arithmetic() {
    let acc = [0.5, 0.7, 0.9];
    let stats: Vec<MetricStats> = acc
        .iter()
        .map(|&a| MetricStats {
            acc: a,
            ..MetricStats::default()
        })
        .collect();
    let (mean, std) = aggregate(&stats);
    assert!((mean.acc - 0.7).abs() < 1e-15);
    assert!((std.acc - 0.2).abs() < 1e-15);
}

#[test]
fn protocol_is_deterministic_across_thread_counts() {
    let cfg = small_config(Variant::Hlora, vec![0, 1, 2, 3]);
    let a = run_protocol_with_threads(&cfg, 1).unwrap().without_timing();
    let b = run_protocol_with_threads(&cfg, 4).unwrap().without_timing();
    assert_eq!(a.to_json_pretty(), b.to_json_pretty());
    let seeds: Vec<u64> = a.per_seed.iter().map(|t| t.seed).collect();
    assert_eq!(seeds, vec![0, 1, 2, 3]);
}

#[test]
fn trial_errors_carry_the_seed() {
    let mut cfg = small_config(Variant::Lora, vec![5]);
    cfg.training.learning_rate = 1e300;
    match run_protocol(&cfg) {
        Err(Error::Trial { seed, source }) => {
            assert_eq!(seed, 5);
            assert!(matches!(*source, Error::Diverged { .. }));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn csv_pool_is_subsampled_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_synthetic(&small_spec()).unwrap();
    let (train, test) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    write_csv(&train, &data.train).unwrap();
    write_csv(&test, &data.test).unwrap();
    let mut cfg = small_config(Variant::Lora, vec![0, 1]);
    cfg.dataset = DatasetSource::Csv(CsvSource {
        train,
        test,
        n_train: Some(10),
    });
    let s = run_protocol(&cfg).unwrap();
    assert_eq!(s.per_seed.len(), 2);
    assert!(s.per_seed.iter().all(|t| (0.0..=1.0).contains(&t.acc)));
}
