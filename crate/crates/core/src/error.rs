use thiserror::Error;

use crate::integrate::Path;

/// Errors produced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: dimension mismatches, bad grids, mode-count mismatches.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration the routine refuses to run (unstable dt, non-autonomous model, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A request that falls outside a sampled window.
    #[error("out of range: {0}")]
    Range(String),

    /// The state norm exceeded the blow-up bound.
    #[error("divergence at step {step} (t = {time}): |x|_H = {norm:e}")]
    Divergence { step: usize, time: f64, norm: f64 },

    /// Pullback gaps stopped shrinking across consecutive horizons.
    #[error("pullback did not converge{}: {detail}", seed.map(|s| format!(" (seed {s})")).unwrap_or_default())]
    NonConvergence { detail: String, seed: Option<u64> },

    /// The diffusion cannot be inverted along a path, so the action is +inf.
    #[error("non-invertible diffusion at step {step}: {detail}")]
    NonInvertibleDiffusion { step: usize, detail: String },

    /// Line search failed repeatedly; carries the best iterate.
    #[error("optimization stalled after {iterations} iterations (action {value:e})")]
    Stalled {
        iterations: usize,
        value: f64,
        best: Box<Path>,
    },

    /// Too few usable points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::NonConvergence { .. }
                | Error::NonInvertibleDiffusion { .. }
                | Error::Stalled { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
