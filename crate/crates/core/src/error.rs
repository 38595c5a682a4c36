use thiserror::Error;

/// Errors produced by the model, analysis and FDTD layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dynamics matrix is numerically singular")]
    Singular,

    #[error("time integration did not converge by t = {t_end} (residual {residual:e})")]
    Convergence { t_end: f64, residual: f64 },

    #[error("eigensolver did not converge")]
    Eigen,

    #[error("solver failed at detuning {delta}: {source}")]
    AtDetuning {
        delta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("FDTD instability at step {step}: |field| = {magnitude:e} exceeds {limit:e}")]
    Instability {
        step: usize,
        magnitude: f64,
        limit: f64,
    },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// True for the numerical failure classes (singular systems, eigensolver,
    /// integration and FDTD blow-up), including those wrapped with a detuning.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular
            | Error::Convergence { .. }
            | Error::Eigen
            | Error::Instability { .. } => true,
            Error::AtDetuning { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
