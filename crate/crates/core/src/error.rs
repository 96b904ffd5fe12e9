use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A configuration value is invalid. `field` names the offending entry.
    #[error("invalid value for `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Non-finite state or derivative encountered while integrating.
    #[error("numerical blowup at t = {t}")]
    Blowup { t: f64 },

    /// Kinetic energy dropped below the Jacobi guard; the Jacobi metric is
    /// degenerate there.
    #[error("Jacobi guard hit at t = {t}: kinetic energy {kinetic:e} < guard {guard:e}")]
    Singular { t: f64, kinetic: f64, guard: f64 },

    #[error("{0}")]
    Internal(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures produced by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Blowup { .. } | Error::Singular { .. } | Error::Internal(_)
        )
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
