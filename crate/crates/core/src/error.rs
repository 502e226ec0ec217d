use thiserror::Error;

/// Errors produced while building operators, meshes, or running the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature node solver failed: {0}")]
    Quadrature(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("geometry error in element {element}: {msg}")]
    Geometry { element: usize, msg: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("orientation error: {0}")]
    Orientation(String),

    #[error("solution diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    #[error("size guard: {0}")]
    TooLarge(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short category name, used by the CLI for diagnostics and exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::Quadrature(_) => "quadrature",
            Error::Dimension { .. } => "dimension",
            Error::Mesh(_) => "mesh",
            Error::Geometry { .. } => "geometry",
            Error::Topology(_) => "topology",
            Error::Orientation(_) => "orientation",
            Error::Divergence { .. } => "divergence",
            Error::TooLarge(_) => "size",
            Error::Verification(_) => "verification",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) => 2,
            Error::Io(_) => 3,
            Error::Divergence { .. } => 4,
            Error::TooLarge(_) => 5,
            Error::Verification(_) => 6,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
