use thiserror::Error;

/// Errors raised by circuit construction, simulation and the estimation pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("circuit width mismatch: {left} vs {right} qubits")]
    WidthMismatch { left: usize, right: usize },

    #[error("qubit index {index} out of range for {num_qubits}-qubit circuit")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("gate acts on qubit {0} more than once")]
    DuplicateQubit(usize),

    #[error("multiplexer with {controls} controls needs {expected} angles, got {actual}")]
    AngleTableLength {
        controls: usize,
        expected: usize,
        actual: usize,
    },

    #[error("{what} supports at most {limit} qubits, got {actual}")]
    TooManyQubits {
        what: &'static str,
        limit: usize,
        actual: usize,
    },

    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("table length {actual} is not 2^{qubits} = {expected}")]
    TableLength {
        qubits: usize,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("operator is not in the H-layer + single-oracle normal form: {0}")]
    NotNormalForm(String),

    #[error("calibration matrix is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        Error::Parse {
            line,
            message: err.to_string(),
        }
    }
}
