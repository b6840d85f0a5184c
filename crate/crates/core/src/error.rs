use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a precondition. `module` and `field` name the offender.
    #[error("{module}: invalid {field}: {reason}")]
    Domain {
        module: &'static str,
        field: &'static str,
        reason: String,
    },

    #[error("hilbert space dimension {dim} exceeds cap {cap}; {suggestion}")]
    DimensionCap {
        dim: usize,
        cap: usize,
        suggestion: String,
    },

    #[error("crossing not bracketed: minimum branch separation lies on the axis boundary")]
    CrossingNotBracketed,

    #[error("not in dispersive regime: {0}")]
    NotDispersive(String),

    #[error("fit did not converge after {evaluations} evaluations")]
    NotConverged { evaluations: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(module: &'static str, field: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            module,
            field,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
            Error::Domain { .. }
            | Error::DimensionCap { .. }
            | Error::CrossingNotBracketed
            | Error::NotDispersive(_) => 2,
            Error::NotConverged { .. } => 3,
        }
    }
}

/// Fails with a domain error unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(module: &'static str, field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(module, field, format!("must be finite and > 0, got {value}")))
    }
}
