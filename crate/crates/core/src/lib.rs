//! Noise budgets for cryogenic microwave amplification chains.
//!
//! The crate forward-models cascaded loss and amplifier stages in
//! photon-number units, fits shot-noise and Johnson-noise calibration curves
//! to extract a chain's gain and added noise, and inverts the cascade to
//! attribute noise to individual stages.
//!
//! Physics modules are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin them to `f64`, which is what the fitters and the command-line
//! tool use.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= lo)` also rejects NaN.

pub mod budget;
pub mod chainmodel;
pub mod error;
pub mod fitter;
pub mod profile;
pub mod quanta;
pub mod scalar;
pub mod sources;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Frequency = quanta::Frequency<f64>;
pub type Temperature = quanta::Temperature<f64>;
pub type Occupancy = quanta::Occupancy<f64>;
pub type GainDb = quanta::GainDb<f64>;
pub type GainLinear = quanta::GainLinear<f64>;
pub type PowerDbm = quanta::PowerDbm<f64>;
pub type PowerWatts = quanta::PowerWatts<f64>;
pub type Efficiency = quanta::Efficiency<f64>;

pub type Profile = profile::Profile<f64>;
pub type Stage = chainmodel::Stage<f64>;
pub type StageKind = chainmodel::StageKind<f64>;
pub type ChainConfig = chainmodel::ChainConfig<f64>;
pub type BandWindow = chainmodel::BandWindow<f64>;
pub type ChainNoiseReport = chainmodel::ChainNoiseReport<f64>;
pub type ExactPropagation = chainmodel::ExactPropagation<f64>;

pub type ChainConfigF32 = chainmodel::ChainConfig<f32>;
