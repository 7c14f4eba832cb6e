use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline. Messages carry the module that
/// produced them so the CLI can surface them verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{module}: parse error: {message}")]
    Parse {
        module: &'static str,
        message: String,
    },
    #[error("boolfn: validation error: {0}")]
    Validation(String),
    #[error("boolfn: composition rejected: {0}")]
    Compose(String),
    #[error("{module}: degenerate function: {message}")]
    Degenerate {
        module: &'static str,
        message: String,
    },
    #[error(
        "advsdp: Gram matrix is not PSD (minimum eigenvalue {min_eigenvalue:e} < -{tolerance:e})"
    )]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },
    #[error("advsdp: solver did not converge after {iterations} iterations (primal residual {primal_residual:e}, dual residual {dual_residual:e}, gap {gap:e})")]
    NoConvergence {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
    },
    #[error("advsdp: invalid adversary matrix: {0}")]
    InvalidCertificate(String),
    #[error("graphrefl: input {0} is not in the domain")]
    NotInDomain(String),
    #[error("{module}: dimension mismatch: {message}")]
    Dimension {
        module: &'static str,
        message: String,
    },
    #[error("spectral: not a projector ({name}: residual {residual:e})")]
    NotProjector { name: &'static str, residual: f64 },
    #[error("spectral: precondition failed: {0}")]
    Precondition(String),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
