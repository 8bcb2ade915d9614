//! `phaselab`: experiment runner.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const CONFIG_HELP: &str = "\
CONFIG FILE (JSON, unknown keys rejected; only adapter.variant is required)
  dataset       {\"synthetic\": {...}} or {\"csv\": {...}}   [default: synthetic]
    synthetic.d             feature width                   [default: 64]
    synthetic.n_train       training samples per seed       [default: 200]
    synthetic.n_test        fixed test samples              [default: 1000]
    synthetic.tone_indices  latent tone bins, each in (0, d/2) [default: [3, 7, 11]]
    synthetic.phase_gap     class phase offset, radians     [default: 0.8]
    synthetic.noise_sigma   latent noise std                [default: 0.3]
    synthetic.mixing_seed   seed of phases and mixing map   [default: 0]
    synthetic.sample_seed   seed of the test draw           [default: 0]
    csv.train, csv.test     label,f0,...,f{d-1} files       [required for csv]
    csv.n_train             balanced subsample per seed     [default: whole pool]
  adapter
    variant       lora | hlora | qlora | act-{identity,tanh,sigmoid,silu} | stacked-linear-N
    r             bottleneck rank (qlora needs 4)         [default: 4]
    alpha         scale numerator, alpha / r             [default: 1.0]
    hilbert_axis  bottleneck | input_feature             [default: bottleneck]
    qnn_preset    table3 (24 angles) | paper-literal (12) [default: table3]
    qnn_encoding  raw | tanh_pi                          [default: raw]
    qlora_residual  add bottleneck to circuit readout    [default: false]
    eps           envelope guard                         [default: 1e-12]
  training
    epochs [20]  batch_size [16]  learning_rate [5e-4]
    beta1 [0.9]  beta2 [0.999]  adam_eps [1e-8]   (Adam)
  protocol
    seeds         trial seeds                            [default: 0..9]
    backbone_seed seed of the frozen backbone            [default: 0]
  output          output directory                       [default: results]

Without --config the built-in acceptance configuration is used
(presets/acceptance.json). PHASELAB_THREADS caps trial parallelism
(default: number of seeds).

EXIT STATUS: 0 success, 1 run error, 2 usage error.";

#[derive(Parser, Debug)]
#[command(name = "phaselab", version, about = "Low-rank adapter experiments on a frozen backbone", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment config (JSON); see `phaselab help <command>` for keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic train and test sets as CSV.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Sample seed; overrides dataset.synthetic.sample_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and evaluate one seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// Trial seed [default: first protocol seed].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every protocol seed and aggregate.
    Protocol {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep rank, training-set size, or bottleneck variant.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// rank: r in {2,4,6}; samples: n_train in {50,...,800}; layers: bottleneck transforms.
        #[arg(long, value_parser = ["rank", "samples", "layers"])]
        sweep: String,
    },
    /// Time training epochs and single-sample inference.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated variants [default: the configured one].
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Timed epochs after one warm-up.
        #[arg(long, default_value_t = 3)]
        epochs: usize,
        /// Timed single-sample forward passes.
        #[arg(long, default_value_t = 100)]
        calls: usize,
    },
    /// Train one seed and write test-set bottleneck and output features.
    Embed {
        #[command(flatten)]
        common: Common,
        /// Trial seed [default: first protocol seed].
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in property checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::GenData { common, seed } => commands::gen_data(&common, seed),
        Command::Train { common, seed } => commands::train(&common, seed),
        Command::Protocol { common } => commands::protocol(&common),
        Command::Ablate { common, sweep } => commands::ablate(&common, &sweep),
        Command::Bench {
            common,
            variants,
            epochs,
            calls,
        } => commands::bench(&common, &variants, epochs, calls),
        Command::Embed { common, seed } => commands::embed(&common, seed),
        Command::Selftest => commands::selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
