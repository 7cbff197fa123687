use thiserror::Error;

/// Errors raised by the dynamics, controller, trajectory and analysis layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// Cholesky factorization of the mass matrix failed. This only happens
    /// for a corrupted model, since valid models are positive definite.
    #[error("mass matrix is not positive definite at q = {q:?}")]
    Singular { q: Vec<f64> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

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

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
