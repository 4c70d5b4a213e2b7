use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative solver stopped without meeting its tolerance.
    #[error("{what} did not converge after {iterations} iterations (last iterate {last}, residual {residual:e}, bracket [{lo}, {hi}])")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
        residual: f64,
        lo: f64,
        hi: f64,
    },

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for numeric failures (non-convergence of a solver or a quadrature).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Quadrature { .. })
    }
}
