use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by quadrature construction, the stage solver and the
/// benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Method parameters outside the supported range (need `1 <= s <= k <= 64`).
    #[error("invalid method parameters k={k}, s={s}: need 1 <= s <= k <= 64")]
    InvalidParams { k: usize, s: usize },

    /// A Gauss node refused to converge under Newton iteration. Does not
    /// happen for the supported range of k; kept so callers can rule it out.
    #[error("Gauss node {index} of the {k}-point rule did not converge (residual {residual:.3e})")]
    NodeNonConvergence {
        k: usize,
        index: usize,
        residual: f64,
    },

    /// The nonlinear stage iteration hit its iteration cap. The caller may
    /// shrink the stepsize, raise s, or switch to the Newton variant.
    #[error("stage iteration did not converge after {iterations} iterations (residual {last_residual:.3e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
    },

    /// A coefficient or grid vector does not match the basis layout.
    #[error("vector of length {got} does not match layout size {expected}")]
    LayoutMismatch { expected: usize, got: usize },

    /// Projection grid too coarse for the requested number of modes.
    #[error("grid with m={m} cannot resolve the basis, need m >= {needed}")]
    AliasingRisk { m: usize, needed: usize },

    /// A run specification that cannot be executed as given.
    #[error("invalid run specification: {0}")]
    InvalidSpec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
