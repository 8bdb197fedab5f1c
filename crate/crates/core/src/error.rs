use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible sampler state: {0}")]
    InfeasibleState(String),

    #[error("numerical underflow: {0}")]
    NumericalUnderflow(String),

    #[error("rho = {rho} lies outside the admissible interval ({lo}, {hi})")]
    RhoOutOfRange { rho: f64, lo: f64, hi: f64 },

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("fallback rate {rate:e} exceeds the {limit:e} limit ({count} of {draws} truncated draws)")]
    FallbackRate {
        rate: f64,
        limit: f64,
        count: u64,
        draws: u64,
    },

    #[error("{pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidSpec(_) | Error::Dimension(_) => 2,
            Error::Io { .. } | Error::Parse { .. } => 4,
            Error::RhoOutOfRange { .. } => 2,
            Error::NotPositiveDefinite { .. }
            | Error::Domain(_)
            | Error::InfeasibleState(_)
            | Error::NumericalUnderflow(_)
            | Error::DegenerateData(_)
            | Error::FallbackRate { .. } => 3,
        }
    }

    /// Short machine-readable tag used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::Domain(_) => "domain",
            Error::Dimension(_) => "dimension",
            Error::InfeasibleState(_) => "infeasible_state",
            Error::NumericalUnderflow(_) => "numerical_underflow",
            Error::RhoOutOfRange { .. } => "rho_out_of_range",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::DegenerateData(_) => "degenerate_data",
            Error::FallbackRate { .. } => "fallback_rate",
            Error::Config { .. } => "config",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }
}
