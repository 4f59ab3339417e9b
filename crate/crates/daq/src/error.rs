//! Crate-wide error type.

/// Errors surfaced by configuration validation, oracles, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum DaqError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("value iteration did not converge within {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: u64, residual: f64 },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl DaqError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        DaqError::Io {
            context: context.into(),
            source,
        }
    }
}
