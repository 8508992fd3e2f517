use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("{what} out of range: {value} ({constraint})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("invalid chain configuration: {0}")]
    InvalidChain(String),

    #[error("chain has no parametric amplifier stage")]
    MissingParamAmp,

    #[error("not enough asymptotic points on the {branch} branch: need {needed} with |eV/(2hf)| > {threshold} quanta, found {found}")]
    InsufficientAsymptote {
        branch: &'static str,
        needed: usize,
        found: usize,
        threshold: f64,
    },

    #[error("degenerate calibration data: {0}")]
    Degenerate(String),

    #[error("fit did not converge after {iterations} iterations (cost {cost:.6e}, active bounds: {active_bounds:?})")]
    NoConvergence {
        iterations: usize,
        cost: f64,
        active_bounds: Vec<&'static str>,
    },

    #[error("inferred {what} is negative ({value:.6e}) at {frequency_hz:.6e} Hz; calibration inputs are inconsistent")]
    NegativeInference {
        what: &'static str,
        value: f64,
        frequency_hz: f64,
    },

    #[error("resistance undefined for zero current")]
    ZeroCurrent,
}

pub(crate) fn finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}
