//! Calibrated noise sources and a seeded synthetic-measurement generator.
//!
//! The shot-noise tunnel junction emits
//!
//! ```text
//! N(V) = (k_B T / 2hf) · [x₊·coth(x₊) + x₋·coth(x₋)],   x± = (eV ± hf) / (2 k_B T)
//! ```
//!
//! which reduces to the Johnson form `½·coth(hf/2k_BT)` at zero bias and to
//! `|eV|/(2hf)` at high bias.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::quanta::{thermal_occupancy, Frequency, GainLinear, Occupancy, Temperature, E_OVER_KB};
use crate::scalar::Scalar;

// |x| below which x·coth(x) and its derivatives use their Taylor series.
const SERIES_CUTOFF: f64 = 0.05;
// |x| above which x²/sinh²(x) underflows to zero anyway.
const TAIL_CUTOFF: f64 = 300.0;

/// `x·coth(x)`, even, equal to 1 at the origin.
fn x_coth_x<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(SERIES_CUTOFF) {
        let x2 = x * x;
        T::one() + x2 / T::lit(3.0) - x2 * x2 / T::lit(45.0)
            + T::lit(2.0) * x2 * x2 * x2 / T::lit(945.0)
    } else {
        x / x.tanh()
    }
}

/// d/dx `x·coth(x)` = `coth(x) - x/sinh²(x)`.
fn x_coth_x_slope<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(SERIES_CUTOFF) {
        let x2 = x * x;
        x * (T::lit(2.0) / T::lit(3.0) - T::lit(4.0) * x2 / T::lit(45.0)
            + T::lit(12.0) * x2 * x2 / T::lit(945.0))
    } else if x.abs() > T::lit(TAIL_CUTOFF) {
        x.signum()
    } else {
        let s = x.sinh();
        T::one() / x.tanh() - x / (s * s)
    }
}

/// `x²/sinh²(x)`, which is `g(x) - x·g'(x)` for `g = x·coth(x)`.
fn x_over_sinh_sq<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(SERIES_CUTOFF) {
        let x2 = x * x;
        T::one() - x2 / T::lit(3.0) + x2 * x2 / T::lit(15.0)
    } else if x.abs() > T::lit(TAIL_CUTOFF) {
        T::zero()
    } else {
        let r = x / x.sinh();
        r * r
    }
}

/// Occupancy emitted by a voltage-biased tunnel junction at temperature `t`.
///
/// `t = 0` uses the analytic limit `(|eV + hf| + |eV - hf|) / (4hf)`.
pub fn sntj_occupancy<T: Scalar>(v: T, t: Temperature<T>, f: Frequency<T>) -> Result<Occupancy<T>> {
    finite("bias voltage", v.to_f64_lossy())?;
    Ok(Occupancy(sntj_terms(v, t.kelvin(), f).0))
}

/// Occupancy and its partial derivatives with respect to bias voltage and
/// junction temperature, `(N, ∂N/∂V, ∂N/∂T)`.
pub fn sntj_occupancy_gradient<T: Scalar>(
    v: T,
    t: Temperature<T>,
    f: Frequency<T>,
) -> Result<(T, T, T)> {
    finite("bias voltage", v.to_f64_lossy())?;
    Ok(sntj_terms(v, t.kelvin(), f))
}

fn sntj_terms<T: Scalar>(v: T, kelvin: T, f: Frequency<T>) -> (T, T, T) {
    // Energies expressed as temperatures.
    let ev = v * T::lit(E_OVER_KB);
    let hf = f.quantum_temperature();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let xp = (ev + hf) / (two * kelvin);
    let xm = (ev - hf) / (two * kelvin);
    if kelvin == T::zero() || !xp.is_finite() || !xm.is_finite() {
        let n = ((ev + hf).abs() + (ev - hf).abs()) / (four * hf);
        let dn_dv = T::lit(E_OVER_KB) / (four * hf) * (signum0(ev + hf) + signum0(ev - hf));
        return (n, dn_dv, T::zero());
    }
    let n = kelvin / (two * hf) * (x_coth_x(xp) + x_coth_x(xm));
    let dn_dv = T::lit(E_OVER_KB) / (four * hf) * (x_coth_x_slope(xp) + x_coth_x_slope(xm));
    let dn_dt = (x_over_sinh_sq(xp) + x_over_sinh_sq(xm)) / (two * hf);
    (n, dn_dv, dn_dt)
}

fn signum0<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x.signum()
    }
}

/// Johnson noise of a matched load at temperature `t`.
pub fn johnson_occupancy<T: Scalar>(t: Temperature<T>, f: Frequency<T>) -> Occupancy<T> {
    thermal_occupancy(t, f)
}

/// Junction bias voltage from bias current, `V = R·I`.
pub fn bias_voltage(resistance_ohm: f64, current_a: f64) -> Result<f64> {
    if !(resistance_ohm > 0.0) || !resistance_ohm.is_finite() {
        return Err(Error::OutOfRange {
            what: "junction resistance",
            value: resistance_ohm,
            constraint: "must be finite and > 0 ohm",
        });
    }
    finite("bias current", current_a)?;
    Ok(resistance_ohm * current_a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SntjParams {
    pub temperature: Temperature,
    pub resistance_ohm: f64,
    pub v_offset: f64,
    /// Bias voltages, V.
    pub bias: Vec<f64>,
}

impl SntjParams {
    pub fn new(
        temperature: Temperature,
        resistance_ohm: f64,
        v_offset: f64,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if !(resistance_ohm > 0.0) || !resistance_ohm.is_finite() {
            return Err(Error::OutOfRange {
                what: "junction resistance",
                value: resistance_ohm,
                constraint: "must be finite and > 0 ohm",
            });
        }
        finite("voltage offset", v_offset)?;
        for &v in &bias {
            finite("bias voltage", v)?;
        }
        Ok(Self {
            temperature,
            resistance_ohm,
            v_offset,
            bias,
        })
    }

    /// Evenly spaced bias sweep from `v_min` to `v_max`.
    pub fn sweep(
        temperature: Temperature,
        resistance_ohm: f64,
        v_offset: f64,
        v_min: f64,
        v_max: f64,
        points: usize,
    ) -> Result<Self> {
        if points < 2 || !(v_max > v_min) {
            return Err(Error::OutOfRange {
                what: "bias sweep",
                value: points as f64,
                constraint: "needs >= 2 points and v_max > v_min",
            });
        }
        let step = (v_max - v_min) / (points - 1) as f64;
        let bias = (0..points).map(|i| v_min + step * i as f64).collect();
        Self::new(temperature, resistance_ohm, v_offset, bias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VtsParams {
    pub temperatures: Vec<Temperature>,
}

impl VtsParams {
    pub fn new(temperatures: Vec<Temperature>) -> Result<Self> {
        if temperatures
            .windows(2)
            .any(|w| !(w[1].kelvin() > w[0].kelvin()))
        {
            return Err(Error::OutOfRange {
                what: "stage temperatures",
                value: f64::NAN,
                constraint: "must be strictly increasing",
            });
        }
        Ok(Self { temperatures })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NoiseSource {
    Sntj(SntjParams),
    Vts(VtsParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Volts,
    Kelvin,
}

/// Sampled output noise against bias voltage or source temperature.
///
/// `y` is in input-referred quanta or in arbitrary raw power units; fits
/// extract the lumped gain either way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseCurve {
    pub frequency: Frequency,
    pub kind: AxisKind,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rel_noise: Option<f64>,
    pub seed: Option<u64>,
}

/// One CSV row of a serialized [`NoiseCurve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CurveRow {
    frequency_hz: f64,
    x_value: f64,
    x_kind: AxisKind,
    y_quanta: f64,
}

impl NoiseCurve {
    pub fn new(frequency: Frequency, kind: AxisKind, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Degenerate(format!(
                "curve has {} x values but {} y values",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::Degenerate("curve is empty".into()));
        }
        for &v in &x {
            finite("curve x value", v)?;
        }
        let increasing = x.windows(2).all(|w| w[1] > w[0]);
        let decreasing = x.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Degenerate(
                "curve x values must be strictly monotone".into(),
            ));
        }
        if let Some(&bad) = y.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::Degenerate(format!(
                "curve y values must be finite and positive (found {bad})"
            )));
        }
        Ok(Self {
            frequency,
            kind,
            x,
            y,
            rel_noise: None,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Writes `frequency_hz,x_value,x_kind,y_quanta` rows with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (&x, &y) in self.x.iter().zip(&self.y) {
            w.serialize(CurveRow {
                frequency_hz: self.frequency.hertz(),
                x_value: x,
                x_kind: self.kind,
                y_quanta: y,
            })
            .map_err(|e| Error::Degenerate(format!("csv write failed: {e}")))?;
        }
        w.flush()
            .map_err(|e| Error::Degenerate(format!("csv write failed: {e}")))
    }

    /// Reads a curve written by [`NoiseCurve::write_csv`]. All rows must
    /// share one frequency and one axis kind.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Degenerate(format!("csv header: {e}")))?
            .clone();
        for required in ["frequency_hz", "x_value", "x_kind", "y_quanta"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::Degenerate(format!(
                    "csv is missing column '{required}'"
                )));
            }
        }
        let mut rows = Vec::new();
        for (i, row) in rdr.deserialize::<CurveRow>().enumerate() {
            rows.push(row.map_err(|e| Error::Degenerate(format!("csv row {}: {e}", i + 1)))?);
        }
        let first = rows
            .first()
            .ok_or_else(|| Error::Degenerate("curve csv has no data rows".into()))?;
        let (f, kind) = (first.frequency_hz, first.x_kind);
        if rows.iter().any(|r| r.frequency_hz != f || r.x_kind != kind) {
            return Err(Error::Degenerate(
                "curve csv mixes frequencies or axis kinds".into(),
            ));
        }
        Self::new(
            Frequency::new(f)?,
            kind,
            rows.iter().map(|r| r.x_value).collect(),
            rows.iter().map(|r| r.y_quanta).collect(),
        )
    }
}

/// Forward model of a calibration measurement with multiplicative Gaussian
/// noise: `y = G_c·(N_in(x) + N_Σ')·(1 + ε)`, `ε ~ N(0, rel_noise²)`.
///
/// The shot-noise source is evaluated at `V - V_off`. The same seed and grid
/// always produce the same curve.
pub fn synthesize_curve(
    source: &NoiseSource,
    chain_gain: GainLinear,
    n_sigma_off: Occupancy,
    f: Frequency,
    rel_noise: f64,
    seed: u64,
) -> Result<NoiseCurve> {
    if !(rel_noise >= 0.0) || !rel_noise.is_finite() {
        return Err(Error::OutOfRange {
            what: "relative noise",
            value: rel_noise,
            constraint: "must be finite and >= 0",
        });
    }
    let (kind, x, clean): (AxisKind, Vec<f64>, Vec<f64>) = match source {
        NoiseSource::Sntj(p) => {
            let clean = p
                .bias
                .iter()
                .map(|&v| sntj_occupancy(v - p.v_offset, p.temperature, f).map(|n| n.quanta()))
                .collect::<Result<_>>()?;
            (AxisKind::Volts, p.bias.clone(), clean)
        }
        NoiseSource::Vts(p) => (
            AxisKind::Kelvin,
            p.temperatures.iter().map(|t| t.kelvin()).collect(),
            p.temperatures
                .iter()
                .map(|&t| johnson_occupancy(t, f).quanta())
                .collect(),
        ),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, rel_noise).expect("validated sigma");
    let y = clean
        .iter()
        .map(|n| {
            let model = chain_gain.ratio() * (n + n_sigma_off.quanta());
            if rel_noise == 0.0 {
                model
            } else {
                model * (1.0 + normal.sample(&mut rng))
            }
        })
        .collect();
    let mut curve = NoiseCurve::new(f, kind, x, y)?;
    curve.rel_noise = Some(rel_noise);
    curve.seed = Some(seed);
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quanta::{E_OVER_H, H_OVER_KB};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ghz(v: f64) -> Frequency {
        Frequency::from_ghz(v).unwrap()
    }

    fn k(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    /// Direct transcription of the junction formula, no special cases.
    fn naive(v: f64, t: f64, f: f64) -> f64 {
        let ev = v * E_OVER_KB;
        let hf = f * H_OVER_KB;
        let xp = (ev + hf) / (2.0 * t);
        let xm = (ev - hf) / (2.0 * t);
        t / (2.0 * hf) * (xp / xp.tanh() + xm / xm.tanh())
    }

    #[test]
    fn zero_bias_is_johnson() {
        for t in [0.0, 0.01, 0.04, 0.5, 4.0, 30.0] {
            let s = sntj_occupancy(0.0, k(t), ghz(4.5)).unwrap().quanta();
            let j = johnson_occupancy(k(t), ghz(4.5)).quanta();
            assert_relative_eq!(s, j, max_relative = 1e-12);
        }
    }

    #[test]
    fn high_bias_asymptote() {
        let v = 100e-6;
        let n = sntj_occupancy(v, k(0.04), ghz(4.5)).unwrap().quanta();
        let asym = v * E_OVER_H / (2.0 * 4.5e9);
        assert!((asym - 2.687).abs() < 1e-3, "{asym}");
        assert!((n - asym).abs() / asym < 5e-3);
    }

    #[test]
    fn matches_naive_formula_away_from_singularities() {
        for &(v, t) in &[(30e-6, 0.04), (-80e-6, 0.2), (5e-6, 1.0), (250e-6, 0.01)] {
            let n = sntj_occupancy(v, k(t), ghz(4.5)).unwrap().quanta();
            assert_relative_eq!(n, naive(v, t, 4.5e9), max_relative = 1e-12);
        }
    }

    #[test]
    fn continuous_at_photon_threshold() {
        let f = ghz(4.5);
        let v0 = f.hertz() / E_OVER_H;
        for t in [0.0, 0.02, 0.2] {
            let at = sntj_occupancy(v0, k(t), f).unwrap().quanta();
            let near = sntj_occupancy(v0 * (1.0 + 1e-9), k(t), f).unwrap().quanta();
            assert!((at - near).abs() < 1e-6, "t={t}: {at} vs {near}");
        }
    }

    #[test]
    fn zero_temperature_limit_is_continuous() {
        let f = ghz(4.5);
        for v in [0.0, 10e-6, 18.6e-6, 50e-6, -120e-6] {
            let zero = sntj_occupancy(v, k(0.0), f).unwrap().quanta();
            let tiny = sntj_occupancy(v, k(1e-5), f).unwrap().quanta();
            assert!((zero - tiny).abs() < 1e-6, "v={v}: {zero} vs {tiny}");
        }
    }

    #[test]
    fn rejects_non_finite_bias() {
        assert!(sntj_occupancy(f64::NAN, k(0.1), ghz(4.5)).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let f = ghz(4.5);
        for &(v, t) in &[
            (3e-6, 0.04),
            (25e-6, 0.04),
            (-60e-6, 0.3),
            (0.0, 0.9),
            (150e-6, 0.01),
        ] {
            let (_, dv, dt) = sntj_occupancy_gradient(v, k(t), f).unwrap();
            let hv = 1e-9;
            let num_v = (naive(v + hv, t, 4.5e9) - naive(v - hv, t, 4.5e9)) / (2.0 * hv);
            let ht = 1e-6 * t;
            let num_t = (naive(v, t + ht, 4.5e9) - naive(v, t - ht, 4.5e9)) / (2.0 * ht);
            assert!(
                (dv - num_v).abs() <= 1e-5 * num_v.abs().max(1.0),
                "dv {dv} vs {num_v}"
            );
            assert!(
                (dt - num_t).abs() <= 1e-5 * num_t.abs().max(1.0),
                "dt {dt} vs {num_t}"
            );
        }
    }

    fn sntj_source(t: f64, v_off: f64) -> NoiseSource {
        NoiseSource::Sntj(SntjParams::sweep(k(t), 48.2, v_off, -200e-6, 200e-6, 401).unwrap())
    }

    #[test]
    fn noiseless_generator_is_forward_model() {
        let src = sntj_source(0.04, 2e-6);
        let g = GainLinear::new(1e6).unwrap();
        let n_off = Occupancy::new(183.0).unwrap();
        let c = synthesize_curve(&src, g, n_off, ghz(4.5), 0.0, 7).unwrap();
        let NoiseSource::Sntj(p) = &src else {
            unreachable!()
        };
        for (v, y) in p.bias.iter().zip(&c.y) {
            let n = sntj_occupancy(v - 2e-6, k(0.04), ghz(4.5))
                .unwrap()
                .quanta();
            assert_eq!(*y, 1e6 * (n + 183.0));
        }
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let src = sntj_source(0.04, 0.0);
        let g = GainLinear::new(1e6).unwrap();
        let n_off = Occupancy::new(183.0).unwrap();
        let a = synthesize_curve(&src, g, n_off, ghz(4.5), 0.005, 11).unwrap();
        let b = synthesize_curve(&src, g, n_off, ghz(4.5), 0.005, 11).unwrap();
        let c = synthesize_curve(&src, g, n_off, ghz(4.5), 0.005, 12).unwrap();
        assert_eq!(a, b);
        assert!(a.y != c.y);
    }

    #[test]
    fn asymptotic_slope_of_generated_curve() {
        let src = sntj_source(0.04, 0.0);
        let g = 1e6;
        let c = synthesize_curve(
            &src,
            GainLinear::new(g).unwrap(),
            Occupancy::new(183.0).unwrap(),
            ghz(4.5),
            0.0,
            1,
        )
        .unwrap();
        let n = c.len();
        let slope = (c.y[n - 1] - c.y[n - 11]) / (c.x[n - 1] - c.x[n - 11]);
        let expected = g * E_OVER_H / (2.0 * 4.5e9);
        assert_relative_eq!(slope, expected, max_relative = 1e-9);
    }

    #[test]
    fn vts_curve_uses_johnson_noise() {
        let src = NoiseSource::Vts(VtsParams::new(vec![k(0.1), k(1.0), k(4.0)]).unwrap());
        let c = synthesize_curve(
            &src,
            GainLinear::new(2.0).unwrap(),
            Occupancy::new(3.0).unwrap(),
            ghz(4.5),
            0.0,
            0,
        )
        .unwrap();
        assert_eq!(c.kind, AxisKind::Kelvin);
        assert_relative_eq!(
            c.y[2],
            2.0 * (johnson_occupancy(k(4.0), ghz(4.5)).quanta() + 3.0)
        );
        assert!(VtsParams::new(vec![k(1.0), k(1.0)]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let src = sntj_source(0.04, 1e-6);
        let c = synthesize_curve(
            &src,
            GainLinear::new(3.0).unwrap(),
            Occupancy::new(10.0).unwrap(),
            ghz(4.5),
            0.01,
            3,
        )
        .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("frequency_hz,x_value,x_kind,y_quanta\n"));
        assert!(text.lines().nth(1).unwrap().contains(",volts,"));
        let back = NoiseCurve::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.x, c.x);
        assert_eq!(back.y, c.y);
        assert_eq!(back.frequency, c.frequency);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(NoiseCurve::read_csv("".as_bytes()).is_err());
        assert!(NoiseCurve::read_csv("frequency_hz,x_value,x_kind,y_quanta\n".as_bytes()).is_err());
        assert!(NoiseCurve::read_csv("frequency_hz,x_value,y_quanta\n1,2,3\n".as_bytes()).is_err());
        let mixed = "frequency_hz,x_value,x_kind,y_quanta\n1e9,0,volts,1\n2e9,1,volts,1\n";
        assert!(NoiseCurve::read_csv(mixed.as_bytes()).is_err());
        let nonmono = "frequency_hz,x_value,x_kind,y_quanta\n1e9,0,volts,1\n1e9,0,volts,1\n";
        assert!(NoiseCurve::read_csv(nonmono.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn even_in_bias_and_above_vacuum(v in -500e-6f64..500e-6, t in 0.0f64..2.0, f in 1.0f64..12.0) {
            let fr = ghz(f);
            let a = sntj_occupancy(v, k(t), fr).unwrap().quanta();
            let b = sntj_occupancy(-v, k(t), fr).unwrap().quanta();
            prop_assert!((a - b).abs() <= 1e-12 * a);
            prop_assert!(a >= 0.5 - 1e-15);
        }

        #[test]
        fn monotone_beyond_photon_threshold(f in 1.0f64..12.0, t in 0.0f64..1.0,
                                            extra in 0.0f64..1e-4, dv in 1e-7f64..1e-5) {
            let fr = ghz(f);
            let v0 = fr.hertz() / E_OVER_H + extra;
            let a = sntj_occupancy(v0, k(t), fr).unwrap().quanta();
            let b = sntj_occupancy(v0 + dv, k(t), fr).unwrap().quanta();
            prop_assert!(b > a);
        }

        #[test]
        fn cold_high_bias_ratio(f in 1.0f64..12.0, factor in 20.0f64..200.0) {
            let fr = ghz(f);
            let v = factor * fr.hertz() / E_OVER_H;
            let n = sntj_occupancy(v, k(0.0), fr).unwrap().quanta();
            let asym = v * E_OVER_H / (2.0 * fr.hertz());
            prop_assert!((n / asym - 1.0).abs() < 1e-3);
        }
    }
}
