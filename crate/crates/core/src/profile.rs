//! Frequency-dependent stage parameters.
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A stage parameter that is either constant across frequency or tabulated
/// at sampled frequencies and linearly interpolated between them.
///
/// Outside the tabulated span the nearest end value is held.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Profile<T = f64> {
    Constant(T),
    Table(Vec<(T, T)>),
}

impl<T: Scalar> Profile<T> {
    pub fn constant(v: T) -> Self {
        Profile::Constant(v)
    }

    /// Builds a table from `(frequency_hz, value)` pairs, which must have
    /// strictly increasing frequencies.
    pub fn table(points: Vec<(T, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidChain("empty tabulated profile".into()));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidChain(format!(
                    "profile frequencies must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if points.iter().any(|(f, v)| !f.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidChain("non-finite profile entry".into()));
        }
        Ok(Profile::Table(points))
    }

    pub fn at(&self, f_hz: T) -> T {
        match self {
            Profile::Constant(v) => *v,
            Profile::Table(pts) => {
                let first = pts[0];
                let last = pts[pts.len() - 1];
                if f_hz <= first.0 {
                    return first.1;
                }
                if f_hz >= last.0 {
                    return last.1;
                }
                // First index whose frequency is above f.
                let hi = pts.partition_point(|(f, _)| *f <= f_hz);
                let (f0, v0) = pts[hi - 1];
                let (f1, v1) = pts[hi];
                v0 + (v1 - v0) * (f_hz - f0) / (f1 - f0)
            }
        }
    }

    /// All values a profile can take; interpolation never leaves their hull.
    pub fn values(&self) -> Vec<T> {
        match self {
            Profile::Constant(v) => vec![*v],
            Profile::Table(pts) => pts.iter().map(|p| p.1).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        match self {
            Profile::Constant(v) => Profile::Constant(f(*v)),
            Profile::Table(pts) => Profile::Table(pts.iter().map(|&(x, v)| (x, f(v))).collect()),
        }
    }
}
