use thiserror::Error;

/// Errors raised across the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A constructed object violates one of its invariants.
    #[error("validation error: {0}")]
    Validation(String),

    /// A configuration document is malformed or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An intermediate level sits exactly on the laser detuning.
    #[error("intermediate level ({f_e}, {m_fe}) is resonant: Δ − E = 0")]
    Singularity { f_e: i32, m_fe: i32 },

    #[error("assembly error: {0}")]
    Assembly(String),

    /// The adaptive integrator could not make progress.
    #[error("integration failed at t = {t} µs: {reason}")]
    Integration { t: f64, reason: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    /// Process exit code for the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Validation(_) | Error::Config(_) | Error::Singularity { .. } => 2,
            Error::Assembly(_) | Error::Integration { .. } | Error::Evaluation(_) => 3,
            Error::Io(_) | Error::Serialization(_) => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
