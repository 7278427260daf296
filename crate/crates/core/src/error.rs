use thiserror::Error;

/// Coarse error classes, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Feasibility,
    Numerical,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Feasibility => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Io => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Feasibility => "feasibility",
            ErrorCategory::Numerical => "numerical",
            ErrorCategory::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(
        "scale exceeds lattice resolution: Nyquist frequency {nyquist:.4} < {required:.4}; use at least N = {suggested_cells} cells"
    )]
    Resolution { nyquist: f64, required: f64, suggested_cells: usize },

    #[error("too few eigenmodes: {requested} requested, at least {required} needed for the smallest scale")]
    Modes { requested: usize, required: usize },

    #[error("infeasible request: {0}")]
    Feasibility(String),

    #[error("kernel not PSD at tolerance: min eigenvalue {min_eigenvalue:.3e}, max eigenvalue {max_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64, max_eigenvalue: f64 },

    #[error("quadrature did not converge on [{lower}, {upper}]: estimate {estimate:.6e}, error {abs_error:.3e}")]
    Quadrature { lower: f64, upper: f64, estimate: f64, abs_error: f64 },

    #[error("no coupling defined between {0} and {1}")]
    NoCoupling(String, String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_) | Error::Usage(_) | Error::Config(_) | Error::Json(_) => ErrorCategory::Config,
            Error::Resolution { .. }
            | Error::Modes { .. }
            | Error::Feasibility(_)
            | Error::NoCoupling(..)
            | Error::InsufficientData(_) => ErrorCategory::Feasibility,
            Error::NotPsd { .. } | Error::Quadrature { .. } => ErrorCategory::Numerical,
            Error::Io(_) => ErrorCategory::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
