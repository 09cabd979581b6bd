use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {}", .0.join("; "))]
    Model(Vec<String>),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate component {component}: empirical variance is zero")]
    DegenerateComponent { component: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("zero spectral gap between eigenvalues {0} and {1}")]
    SpectralGap(usize, usize),

    #[error("rank deficient: eigenvalue {index} is {value:e}")]
    RankDeficient { index: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) | Error::Model(_) | Error::Domain(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
