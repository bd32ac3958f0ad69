use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver failed to converge.
    #[error("solver error: {message} (last residual {last_residual:.3e})")]
    Solver {
        message: String,
        last_residual: f64,
        residual_history: Vec<f64>,
        /// Last iterate, flattened node-major, when one exists.
        last_iterate: Option<Vec<f64>>,
    },

    /// An input was not produced by a successful upstream computation.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Configuration or input validation failure.
    #[error("invalid {parameter}: {reason}")]
    Validation { parameter: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(parameter: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            parameter: parameter.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn solver(message: impl Into<String>, residual_history: Vec<f64>) -> Self {
        Error::Solver {
            message: message.into(),
            last_residual: residual_history.last().copied().unwrap_or(f64::NAN),
            residual_history,
            last_iterate: None,
        }
    }

    /// Residual history carried by a solver failure, empty otherwise.
    pub fn residual_history(&self) -> &[f64] {
        match self {
            Error::Solver {
                residual_history, ..
            } => residual_history,
            _ => &[],
        }
    }

    /// True for numerical failures (as opposed to bad inputs).
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Solver { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
