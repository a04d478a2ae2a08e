use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("Kepler iteration did not converge after {iterations} iterations (M = {mean_anomaly}, e = {eccentricity}, residual = {residual:e})")]
    KeplerNonConvergence {
        mean_anomaly: f64,
        eccentricity: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("NMPC initialization did not converge after {iterations} Newton iterations (|F| = {residual:e}, target {target:e})")]
    NewtonNonConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
