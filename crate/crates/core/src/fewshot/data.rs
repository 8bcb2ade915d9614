//! Synthetic phase-coded binary task and CSV feature files.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

const STREAM_MIXING: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;

/// Labeled feature rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<u8>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {l} is not 0 or 1")));
        }
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| l as f64).collect()
    }
}

fn default_d() -> usize {
    64
}
fn default_n_train() -> usize {
    200
}
fn default_n_test() -> usize {
    1000
}
fn default_tones() -> Vec<usize> {
    vec![3, 7, 11]
}
fn default_phase_gap() -> f64 {
    0.8
}
fn default_noise() -> f64 {
    0.3
}

/// Knobs of the synthetic task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_tones")]
    pub tone_indices: Vec<usize>,
    #[serde(default = "default_phase_gap")]
    pub phase_gap: f64,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub mixing_seed: u64,
    #[serde(default)]
    pub sample_seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            d: default_d(),
            n_train: default_n_train(),
            n_test: default_n_test(),
            tone_indices: default_tones(),
            phase_gap: default_phase_gap(),
            noise_sigma: default_noise(),
            mixing_seed: 0,
            sample_seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(Error::Config(format!(
                "feature dimension must be at least 3, got {}",
                self.d
            )));
        }
        if self.tone_indices.is_empty() {
            return Err(Error::Config("at least one tone index is required".into()));
        }
        for &k in &self.tone_indices {
            if k == 0 || 2 * k >= self.d {
                return Err(Error::Config(format!("tone index {k} outside (0, {}/2)", self.d)));
            }
        }
        for (name, n) in [("n_train", self.n_train), ("n_test", self.n_test)] {
            if n == 0 || !n.is_multiple_of(2) {
                return Err(Error::Config(format!("{name} must be positive and even, got {n}")));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be finite and non-negative".into()));
        }
        if !self.phase_gap.is_finite() {
            return Err(Error::Config("phase_gap must be finite".into()));
        }
        Ok(())
    }
}

/// The fixed parts of the synthetic task: per-tone class-0 phases and the
/// orthogonal mixing matrix. Both depend only on `mixing_seed`.
#[derive(Clone, Debug)]
pub struct SyntheticTask {
    spec: DatasetSpec,
    base_phases: Vec<f64>,
    mixing: Matrix,
}

impl SyntheticTask {
    pub fn new(spec: &DatasetSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.mixing_seed);
        rng.set_stream(STREAM_MIXING);
        let base_phases = spec
            .tone_indices
            .iter()
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let d = spec.d;
        let mut mixing = Matrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        mixing.orthonormalize_columns()?;
        Ok(SyntheticTask {
            spec: spec.clone(),
            base_phases,
            mixing,
        })
    }

    pub fn spec(&self) -> &DatasetSpec {
        &self.spec
    }

    pub fn mixing(&self) -> &Matrix {
        &self.mixing
    }

    /// Phase of tone `j` for class `c`.
    pub fn phase(&self, class: u8, j: usize) -> f64 {
        self.base_phases[j] + if class == 1 { self.spec.phase_gap } else { 0.0 }
    }

    /// Noise-free latent signal of a class.
    pub fn clean_latent(&self, class: u8) -> Vec<f64> {
        let d = self.spec.d;
        (0..d)
            .map(|n| {
                self.spec
                    .tone_indices
                    .iter()
                    .enumerate()
                    .map(|(j, &k)| (2.0 * PI * (k * n) as f64 / d as f64 + self.phase(class, j)).cos())
                    .sum()
            })
            .collect()
    }

    /// `n` latent rows (before mixing), classes alternating 0, 1, 0, ...
    pub fn sample_latent(&self, n: usize, seed: u64, stream: u64) -> Result<(Matrix, Vec<u8>)> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "sample count must be positive and even, got {n}"
            )));
        }
        let d = self.spec.d;
        let clean = [self.clean_latent(0), self.clean_latent(1)];
        let noise = Normal::new(0.0, self.spec.noise_sigma).map_err(|e| Error::Config(format!("noise_sigma: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = (i % 2) as u8;
            labels.push(c);
            data.extend(clean[c as usize].iter().map(|&v| v + noise.sample(&mut rng)));
        }
        Ok((Matrix::from_raw(n, d, data), labels))
    }

    /// `n` mixed feature rows `x = M u`.
    pub fn sample(&self, n: usize, seed: u64, stream: u64) -> Result<Dataset> {
        let (latent, labels) = self.sample_latent(n, seed, stream)?;
        let features = latent.matmul_t(&self.mixing)?;
        Dataset::new(features, labels)
    }

    /// Training draw for a given seed.
    pub fn train_set(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample(n, seed, STREAM_TRAIN)
    }

    /// Held-out draw; independent of every training draw.
    pub fn test_set(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample(n, seed, STREAM_TEST)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn gen_synthetic(spec: &DatasetSpec) -> Result<SyntheticData> {
    let task = SyntheticTask::new(spec)?;
    Ok(SyntheticData {
        train: task.train_set(spec.n_train, spec.sample_seed)?,
        test: task.test_set(spec.n_test, spec.sample_seed)?,
    })
}

/// Writes `label,f0,...,f{d-1}` with 17 significant digits per value.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..data.dim()).map(|i| format!("f{i}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (r, &label) in data.labels.iter().enumerate() {
        write!(w, "{label}").map_err(io)?;
        for v in data.features.row(r) {
            write!(w, ",{v:.16e}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: display.clone(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(1, format!("{other:?}")),
        })?;

    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.get(0) != Some("label") {
        return Err(parse_err(1, "first column must be `label`".into()));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{i}") {
            return Err(parse_err(1, format!("expected column f{i}, found {name:?}")));
        }
    }
    let d = header.len() - 1;
    if d == 0 {
        return Err(parse_err(1, "no feature columns".into()));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != d + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", d + 1, record.len()),
            ));
        }
        let label = match &record[0] {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(line, format!("label must be 0 or 1, found {other:?}"))),
        };
        labels.push(label);
        for (i, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("f{i}: not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("f{i}: non-finite value {field:?}")));
            }
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Dataset::new(Matrix::from_raw(labels.len(), d, data), labels)
}
