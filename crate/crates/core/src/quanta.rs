//! Physical constants, unit newtypes and the two temperature/occupancy
//! conversions used throughout the crate.
//!
//! There are two distinct ways to turn a temperature into a photon number and
//! they are deliberately named apart:
//!
//! * [`thermal_occupancy`] is the physical one, `½·coth(hf / 2k_BT)`, used for
//!   baths and for Johnson-noise sources.
//! * [`occupancy_to_temperature`] / [`temperature_to_occupancy`] are the
//!   linear reporting convention `T = N·hf/k_B` used for noise temperatures.
//!   They are *not* inverses of [`thermal_occupancy`].

use serde::Serialize;

use crate::error::{finite, Error, Result};
use crate::scalar::Scalar;

/// Planck constant, J·s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K (exact, SI 2019).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge, C (exact, SI 2019).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// h / k_B in K/Hz.
pub const H_OVER_KB: f64 = PLANCK / BOLTZMANN;
/// e / h in Hz/V.
pub const E_OVER_H: f64 = ELEMENTARY_CHARGE / PLANCK;
/// e / k_B in K/V.
pub const E_OVER_KB: f64 = ELEMENTARY_CHARGE / BOLTZMANN;

/// Vacuum occupancy, ½ quantum.
pub const VACUUM_QUANTA: f64 = 0.5;

macro_rules! scalar_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
        #[serde(transparent)]
        pub struct $name<T = f64>(pub(crate) T);

        impl<T: Scalar> $name<T> {
            #[inline]
            pub fn value(self) -> T {
                self.0
            }
        }

        impl<T: Scalar> std::fmt::Display for $name<T> {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

scalar_newtype!(
    /// Frequency in hertz; strictly positive.
    Frequency
);
scalar_newtype!(
    /// Temperature in kelvin; non-negative.
    Temperature
);
scalar_newtype!(
    /// Photon occupancy in quanta; non-negative.
    Occupancy
);
scalar_newtype!(
    /// Power gain in decibels.
    GainDb
);
scalar_newtype!(
    /// Linear power gain; non-negative.
    GainLinear
);
scalar_newtype!(
    /// Power referenced to 1 mW, in dBm.
    PowerDbm
);
scalar_newtype!(
    /// Power in watts; non-negative.
    PowerWatts
);
scalar_newtype!(
    /// Transmission efficiency in (0, 1].
    Efficiency
);

fn check_finite<T: Scalar>(what: &'static str, v: T) -> Result<T> {
    finite(what, v.to_f64_lossy()).map(|_| v)
}

impl<T: Scalar> Frequency<T> {
    pub fn new(hertz: T) -> Result<Self> {
        let hz = check_finite("frequency", hertz)?;
        if hz <= T::zero() {
            return Err(Error::OutOfRange {
                what: "frequency",
                value: hz.to_f64_lossy(),
                constraint: "must be > 0 Hz",
            });
        }
        Ok(Self(hz))
    }

    pub fn from_ghz(ghz: T) -> Result<Self> {
        Self::new(ghz * T::lit(1e9))
    }

    pub fn hertz(self) -> T {
        self.0
    }

    /// Photon energy expressed as a temperature, hf/k_B.
    pub fn quantum_temperature(self) -> T {
        self.0 * T::lit(H_OVER_KB)
    }
}

impl<T: Scalar> Temperature<T> {
    pub fn new(kelvin: T) -> Result<Self> {
        let k = check_finite("temperature", kelvin)?;
        if k < T::zero() {
            return Err(Error::OutOfRange {
                what: "temperature",
                value: k.to_f64_lossy(),
                constraint: "must be >= 0 K",
            });
        }
        Ok(Self(k))
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    pub fn kelvin(self) -> T {
        self.0
    }
}

impl<T: Scalar> Occupancy<T> {
    pub fn new(quanta: T) -> Result<Self> {
        let n = check_finite("occupancy", quanta)?;
        if n < T::zero() {
            return Err(Error::OutOfRange {
                what: "occupancy",
                value: n.to_f64_lossy(),
                constraint: "must be >= 0 quanta",
            });
        }
        Ok(Self(n))
    }

    pub fn vacuum() -> Self {
        Self(T::half())
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    pub fn quanta(self) -> T {
        self.0
    }

    /// Clamp tiny negative round-off to zero; used where a sum of
    /// non-negative terms is formed by subtraction.
    pub(crate) fn saturating(quanta: T) -> Self {
        Self(if quanta < T::zero() {
            T::zero()
        } else {
            quanta
        })
    }
}

impl<T: Scalar> GainDb<T> {
    pub fn new(db: T) -> Result<Self> {
        check_finite("gain in dB", db).map(Self)
    }

    pub fn db(self) -> T {
        self.0
    }

    pub fn to_linear(self) -> GainLinear<T> {
        db_to_linear(self)
    }
}

impl<T: Scalar> GainLinear<T> {
    pub fn new(ratio: T) -> Result<Self> {
        let g = check_finite("linear gain", ratio)?;
        if g < T::zero() {
            return Err(Error::OutOfRange {
                what: "linear gain",
                value: g.to_f64_lossy(),
                constraint: "must be >= 0",
            });
        }
        Ok(Self(g))
    }

    pub fn unity() -> Self {
        Self(T::one())
    }

    pub fn ratio(self) -> T {
        self.0
    }

    pub fn to_db(self) -> GainDb<T> {
        linear_to_db(self)
    }
}

impl<T: Scalar> PowerDbm<T> {
    pub fn new(dbm: T) -> Result<Self> {
        check_finite("power in dBm", dbm).map(Self)
    }

    pub fn dbm(self) -> T {
        self.0
    }

    pub fn to_watts(self) -> PowerWatts<T> {
        dbm_to_watts(self)
    }
}

impl<T: Scalar> PowerWatts<T> {
    pub fn new(watts: T) -> Result<Self> {
        let w = check_finite("power in watts", watts)?;
        if w < T::zero() {
            return Err(Error::OutOfRange {
                what: "power",
                value: w.to_f64_lossy(),
                constraint: "must be >= 0 W",
            });
        }
        Ok(Self(w))
    }

    pub fn watts(self) -> T {
        self.0
    }

    pub fn to_dbm(self) -> PowerDbm<T> {
        watts_to_dbm(self)
    }
}

impl<T: Scalar> Efficiency<T> {
    pub fn new(eta: T) -> Result<Self> {
        let e = check_finite("transmission efficiency", eta)?;
        if !(e > T::zero() && e <= T::one()) {
            return Err(Error::OutOfRange {
                what: "transmission efficiency",
                value: e.to_f64_lossy(),
                constraint: "must lie in (0, 1]",
            });
        }
        Ok(Self(e))
    }

    pub fn lossless() -> Self {
        Self(T::one())
    }

    pub fn eta(self) -> T {
        self.0
    }

    /// Insertion loss in dB, `-10·log10(η)`.
    pub fn insertion_loss_db(self) -> T {
        -T::lit(10.0) * self.0.log10()
    }

    pub fn from_insertion_loss_db(loss_db: T) -> Result<Self> {
        Self::new(T::lit(10.0).powf(-loss_db / T::lit(10.0)))
    }
}

/// Mean photon number of a thermal bath, `½·coth(hf / 2k_BT)`.
///
/// Continuous at `T = 0`, where it returns the vacuum value ½.
pub fn thermal_occupancy<T: Scalar>(t: Temperature<T>, f: Frequency<T>) -> Occupancy<T> {
    let kelvin = t.kelvin();
    if kelvin == T::zero() {
        return Occupancy::vacuum();
    }
    let x = f.quantum_temperature() / (T::lit(2.0) * kelvin);
    // tanh saturates to 1 long before x overflows anything.
    Occupancy(T::half() / x.tanh())
}

/// Linear reporting convention `T = N·hf/k_B`.
pub fn occupancy_to_temperature<T: Scalar>(n: Occupancy<T>, f: Frequency<T>) -> Temperature<T> {
    Temperature(n.quanta() * f.quantum_temperature())
}

/// Inverse of [`occupancy_to_temperature`], `N = T·k_B/(hf)`.
pub fn temperature_to_occupancy<T: Scalar>(t: Temperature<T>, f: Frequency<T>) -> Occupancy<T> {
    Occupancy(t.kelvin() / f.quantum_temperature())
}

pub fn db_to_linear<T: Scalar>(g: GainDb<T>) -> GainLinear<T> {
    GainLinear(T::lit(10.0).powf(g.db() / T::lit(10.0)))
}

/// Decade-log gain. A zero linear gain maps to `-inf` dB.
pub fn linear_to_db<T: Scalar>(g: GainLinear<T>) -> GainDb<T> {
    GainDb(T::lit(10.0) * g.ratio().log10())
}

pub fn dbm_to_watts<T: Scalar>(p: PowerDbm<T>) -> PowerWatts<T> {
    PowerWatts(T::lit(1e-3) * T::lit(10.0).powf(p.dbm() / T::lit(10.0)))
}

pub fn watts_to_dbm<T: Scalar>(p: PowerWatts<T>) -> PowerDbm<T> {
    PowerDbm(T::lit(10.0) * (p.watts() / T::lit(1e-3)).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // k_B/h = 20.836 GHz/K, the rounded value used for hand oracles.
    const KB_OVER_H_GHZ: f64 = 20.836;

    fn coth_series_oracle(t: f64, f_ghz: f64) -> f64 {
        let x = f_ghz / (2.0 * KB_OVER_H_GHZ * t);
        0.5 * (1.0 / x + x / 3.0 - x.powi(3) / 45.0)
    }

    fn ghz(v: f64) -> Frequency {
        Frequency::from_ghz(v).unwrap()
    }

    fn kelvin(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    #[test]
    fn derived_constants() {
        assert_relative_eq!(1.0 / H_OVER_KB / 1e9, KB_OVER_H_GHZ, max_relative = 1e-4);
        // e/h = 241.8 GHz/mV
        assert_relative_eq!(E_OVER_H * 1e-3 / 1e9, 241.8, max_relative = 1e-3);
    }

    #[test]
    fn thermal_occupancy_vacuum_limit() {
        assert_eq!(thermal_occupancy(kelvin(0.0), ghz(4.5)).quanta(), 0.5);
        let tiny = thermal_occupancy(kelvin(1e-6), ghz(4.5)).quanta();
        assert_eq!(tiny, 0.5);
    }

    #[test]
    fn thermal_occupancy_examples() {
        let n = thermal_occupancy(kelvin(4.0), ghz(4.5)).quanta();
        assert_relative_eq!(n, coth_series_oracle(4.0, 4.5), max_relative = 2e-4);
        assert!((n - 18.53).abs() < 0.01, "{n}");

        let n9 = thermal_occupancy(kelvin(4.0), ghz(9.0)).quanta();
        assert_relative_eq!(n9, coth_series_oracle(4.0, 9.0), max_relative = 2e-4);
        assert!((n9 - 9.27).abs() < 0.01, "{n9}");
        assert_relative_eq!(n9 / n, 0.5, max_relative = 1e-3);
    }

    #[test]
    fn reporting_convention_examples() {
        let t = occupancy_to_temperature(Occupancy::new(0.5).unwrap(), ghz(4.5)).kelvin();
        assert_relative_eq!(t, 0.5 * 4.5 / KB_OVER_H_GHZ, max_relative = 1e-4);
        assert!((t - 0.108).abs() < 5e-4);

        assert_eq!(
            occupancy_to_temperature(Occupancy::zero(), ghz(7.0)).kelvin(),
            0.0
        );

        let t = occupancy_to_temperature(Occupancy::new(18.53).unwrap(), ghz(4.5)).kelvin();
        assert!((t - 4.00).abs() < 5e-3, "{t}");
    }

    #[test]
    fn gain_and_power_examples() {
        assert_eq!(db_to_linear(GainDb::new(0.0).unwrap()).ratio(), 1.0);
        assert_relative_eq!(
            db_to_linear(GainDb::new(18.0).unwrap()).ratio(),
            10f64.powf(1.8),
            max_relative = 1e-14
        );
        assert!((db_to_linear(GainDb::new(18.0).unwrap()).ratio() - 63.10_f64).abs() < 5e-3);
        assert_relative_eq!(
            dbm_to_watts(PowerDbm::new(-30.0).unwrap()).watts(),
            1e-6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(Frequency::new(0.0).is_err());
        assert!(Frequency::new(f64::NAN).is_err());
        assert!(Temperature::new(-1.0).is_err());
        assert!(Temperature::new(f64::INFINITY).is_err());
        assert!(Efficiency::new(0.0).is_err());
        assert!(Efficiency::new(1.0 + 1e-12).is_err());
        assert!(Efficiency::new(1.0).is_ok());
        assert!(Occupancy::new(-0.1).is_err());
    }

    #[test]
    fn insertion_loss() {
        let eta = Efficiency::new(0.8).unwrap();
        assert!((eta.insertion_loss_db() - 0.969_f64).abs() < 1e-3);
        let back = Efficiency::from_insertion_loss_db(eta.insertion_loss_db()).unwrap();
        assert_relative_eq!(back.eta(), 0.8, max_relative = 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let n = thermal_occupancy(
            Temperature::<f32>::new(4.0).unwrap(),
            Frequency::<f32>::from_ghz(4.5).unwrap(),
        );
        assert!((n.quanta() - 18.53).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn thermal_occupancy_monotone(t in 0.0f64..300.0, dt in 1e-3f64..10.0,
                                      f in 0.1f64..20.0, df in 1e-3f64..5.0) {
            let n = |t: f64, f: f64| thermal_occupancy(kelvin(t), ghz(f)).quanta();
            prop_assert!(n(t, f) >= 0.5);
            prop_assert!(n(t + dt, f) >= n(t, f));
            prop_assert!(n(t, f + df) <= n(t, f));
        }

        #[test]
        fn classical_limit(f in 0.1f64..20.0, factor in 20.0f64..1000.0) {
            let freq = ghz(f);
            let t = factor * freq.quantum_temperature();
            let n = thermal_occupancy(kelvin(t), freq);
            let back = occupancy_to_temperature(n, freq).kelvin();
            prop_assert!((back - t).abs() / t < 0.01);
        }

        #[test]
        fn decade_log_round_trips(db in -200.0f64..200.0, dbm in -200.0f64..60.0) {
            let g = GainDb::new(db).unwrap();
            let back = linear_to_db(db_to_linear(g)).db();
            prop_assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
            let p = PowerDbm::new(dbm).unwrap();
            let back = watts_to_dbm(dbm_to_watts(p)).dbm();
            prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
            let w = dbm_to_watts(p).watts();
            let again = dbm_to_watts(watts_to_dbm(PowerWatts::new(w).unwrap())).watts();
            prop_assert!((again - w).abs() <= 1e-12 * w);
        }
    }
}
