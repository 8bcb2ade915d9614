//! Few-shot binary classification harness: data, training, metrics, the
//! multi-seed protocol, ablations and timing.

pub mod ablation;
mod data;
pub mod metrics;
pub mod protocol;
pub mod timing;
mod train;

pub use data::{gen_synthetic, load_csv, write_csv, Dataset, DatasetSpec, SyntheticData, SyntheticTask};
pub use metrics::{compute_auc, compute_eer, compute_threshold_metrics, ThresholdMetrics};
pub use protocol::{
    aggregate, default_threads, run_protocol, run_protocol_with_threads, write_loss_csv, MetricStats, PreparedData,
    ProtocolSummary,
};
pub use timing::{bench_timing, BenchOptions, TimingReport};
pub use train::{evaluate, train_model, train_trial, Evaluation, TrainConfig, TrialResult};
