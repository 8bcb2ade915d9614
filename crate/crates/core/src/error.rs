use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("qubit index {index} out of range 1..={num_qubits}")]
    QubitIndex { index: usize, num_qubits: usize },

    #[error("two-qubit gate needs distinct qubits, got {0} and {0}")]
    InvalidPair(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("seed {seed}: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
