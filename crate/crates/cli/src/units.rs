//! Parsing of SI-suffixed command-line values such as `4.5GHz`, `-30dBm`,
//! `0.7mA`, `250uV` or `48.2ohm`.
//!
//! A value is a number followed by an optional unit. A bare number is taken
//! in the base unit of the expected quantity. Prefixes are case-sensitive
//! (`m` is milli, `M` is mega).

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Temperature,
    Voltage,
    Current,
    Resistance,
    /// Gain in dB; a trailing `x` marks a linear ratio instead.
    GainDb,
    /// Power in dBm; `W` with a prefix is accepted and converted.
    PowerDbm,
}

impl Dimension {
    fn base(self) -> &'static [&'static str] {
        match self {
            Dimension::Frequency => &["Hz"],
            Dimension::Temperature => &["K"],
            Dimension::Voltage => &["V"],
            Dimension::Current => &["A"],
            Dimension::Resistance => &["ohm", "Ohm", "Ω"],
            Dimension::GainDb | Dimension::PowerDbm => &[],
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Frequency => "frequency (e.g. 4.5GHz)",
            Dimension::Temperature => "temperature (e.g. 40mK)",
            Dimension::Voltage => "voltage (e.g. 250uV)",
            Dimension::Current => "current (e.g. 0.7mA)",
            Dimension::Resistance => "resistance (e.g. 48.2ohm)",
            Dimension::GainDb => "gain (e.g. 18dB or 63x)",
            Dimension::PowerDbm => "power (e.g. -30dBm or 1uW)",
        };
        f.write_str(s)
    }
}

const PREFIXES: [(&str, f64); 9] = [
    ("p", 1e-12),
    ("n", 1e-9),
    ("u", 1e-6),
    ("µ", 1e-6),
    ("m", 1e-3),
    ("", 1.0),
    ("k", 1e3),
    ("M", 1e6),
    ("G", 1e9),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitError(pub String);

impl fmt::Display for UnitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UnitError {}

fn number(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses `text` as a quantity of dimension `dim`, returning the value in
/// base SI units (dB for gains, dBm for powers).
pub fn parse(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let t = text.trim();
    let err = || UnitError(format!("cannot parse '{text}' as {dim}"));
    if let Some(v) = number(t) {
        return Ok(v);
    }
    match dim {
        Dimension::GainDb => {
            if let Some(v) = t.strip_suffix("dB").and_then(number) {
                return Ok(v);
            }
            if let Some(v) = t.strip_suffix('x').and_then(number) {
                if v > 0.0 {
                    return Ok(10.0 * v.log10());
                }
            }
            return Err(err());
        }
        Dimension::PowerDbm => {
            if let Some(v) = t.strip_suffix("dBm").and_then(number) {
                return Ok(v);
            }
            for (p, scale) in PREFIXES {
                let unit = format!("{p}W");
                if let Some(v) = t.strip_suffix(unit.as_str()).and_then(number) {
                    let w = v * scale;
                    if w > 0.0 {
                        return Ok(10.0 * (w / 1e-3).log10());
                    }
                }
            }
            return Err(err());
        }
        _ => {}
    }
    for base in dim.base() {
        for (p, scale) in PREFIXES {
            let unit = format!("{p}{base}");
            if let Some(v) = t.strip_suffix(unit.as_str()).and_then(number) {
                return Ok(v * scale);
            }
        }
    }
    Err(err())
}

/// Parses a `lo:hi` pair.
pub fn parse_range(text: &str, dim: Dimension) -> Result<(f64, f64), UnitError> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| UnitError(format!("expected lo:hi, got '{text}'")))?;
    Ok((parse(lo, dim)?, parse(hi, dim)?))
}

/// Parses either `start:stop:points` or a comma-separated list.
pub fn parse_list(text: &str, dim: Dimension) -> Result<Vec<f64>, UnitError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let a = parse(parts[0], dim)?;
        let b = parse(parts[1], dim)?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| UnitError(format!("bad point count in '{text}'")))?;
        if n < 2 {
            return Err(UnitError(format!("'{text}' needs at least 2 points")));
        }
        return Ok((0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect());
    }
    text.split(',').map(|s| parse(s, dim)).collect()
}
