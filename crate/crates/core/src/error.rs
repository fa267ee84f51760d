use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("configuration key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unsupported quadrature degree {0} (supported: 1..=10)")]
    QuadratureDegree(usize),

    #[error("negative weight {value:e} at ({x}, {y})")]
    NegativeWeight { value: f64, x: f64, y: f64 },

    #[error("hydraulic conductivity must be symmetric positive definite, got {0:?}")]
    NotSpd([[f64; 2]; 2]),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("misaligned interface: {0}")]
    Interface(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Short machine-readable name used by the CLI error record and the FFI status codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMesh(_) => "mesh",
            Error::Parse { .. } => "parse",
            Error::Config { .. } => "config",
            Error::QuadratureDegree(_) => "quadrature",
            Error::NegativeWeight { .. } => "weight",
            Error::NotSpd(_) | Error::Parameter(_) => "parameter",
            Error::Expression(_) => "expression",
            Error::Interface(_) => "interface",
            Error::Solver(_) => "solver",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
