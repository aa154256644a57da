use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `|sin(ω·t_M)|` fell at or below the resonance guard; the chain variance
    /// diverges at half-period multiples.
    #[error("resonant measurement period: |sin(omega*t_M)| = {sin_abs:e} (tau_M = {tau_m})")]
    Resonance { sin_abs: f64, tau_m: f64 },

    #[error("no interior optimum: {0}")]
    Domain(String),

    /// The replacement collapse cannot be written as a weak measurement of
    /// the given prior.
    #[error("prior width {prior_std} does not exceed the instrument width {sigma_m}")]
    Precision { sigma_m: f64, prior_std: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("probability leaked to the grid boundary: {mass:e} at step {step}")]
    Leakage { mass: f64, step: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
