//! Extraction of chain gain and added noise from calibration curves.
//!
//! Shot-noise curves are fit in two stages. Stage 1 fits straight lines to
//! both high-bias branches, where the junction output is `|eV|/(2hf)`, and
//! yields the lumped chain gain and a first estimate of the added noise.
//! Stage 2 freezes the gain and runs a bounded least-squares fit of the full
//! junction model over the added noise, junction temperature and bias
//! offset. Johnson-noise curves are linear in `(G, G·N_Σ)` and fit directly.

pub mod lm;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quanta::{Frequency, GainLinear, Occupancy, Temperature, E_OVER_H};
use crate::sources::{johnson_occupancy, sntj_occupancy_gradient, AxisKind, NoiseCurve};

use lm::{Bounds, LeastSquaresProblem, LmSettings};

/// Points with `|eV/(2hf)|` strictly above this many quanta form the
/// high-bias asymptote.
pub const ASYMPTOTE_THRESHOLD_QUANTA: f64 = 3.0;
/// Minimum asymptotic points required on each bias branch.
pub const MIN_BRANCH_POINTS: usize = 4;

/// High-bias junction occupancy `|eV|/(2hf)`.
pub fn shot_asymptote_quanta(v: f64, f: Frequency) -> f64 {
    v.abs() * E_OVER_H / (2.0 * f.hertz())
}

/// Which curve points belong to the high-bias asymptote.
pub fn asymptotic_mask(curve: &NoiseCurve, f: Frequency) -> Vec<bool> {
    curve
        .x
        .iter()
        .map(|&v| shot_asymptote_quanta(v, f) > ASYMPTOTE_THRESHOLD_QUANTA)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchFit {
    /// Output per quantum of `|eV|/(2hf)`.
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Smallest and largest `|V|` used, V.
    pub v_abs_min: f64,
    pub v_abs_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotStage1 {
    pub chain_gain: GainLinear,
    pub n_sigma_off: Occupancy,
    pub positive: BranchFit,
    pub negative: BranchFit,
}

fn line_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn require_volts(curve: &NoiseCurve) -> Result<()> {
    if curve.kind != AxisKind::Volts {
        return Err(Error::Degenerate(
            "shot-noise fit needs a curve against bias voltage".into(),
        ));
    }
    Ok(())
}

/// Linear fit of both high-bias branches against `|eV|/(2hf)`.
///
/// Slopes and intercepts of the two branches are averaged, which cancels a
/// small bias offset to first order: slope → `G_c`, intercept → `G_c·N_Σ'`.
pub fn fit_shot_stage1(curve: &NoiseCurve, f: Frequency) -> Result<ShotStage1> {
    require_volts(curve)?;
    let mask = asymptotic_mask(curve, f);
    let branch = |positive: bool, name: &'static str| -> Result<BranchFit> {
        let (xs, ys, vs): (Vec<f64>, Vec<f64>, Vec<f64>) = curve
            .x
            .iter()
            .zip(&curve.y)
            .zip(&mask)
            .filter(|((v, _), keep)| **keep && (**v > 0.0) == positive)
            .map(|((v, y), _)| (shot_asymptote_quanta(*v, f), *y, v.abs()))
            .fold((vec![], vec![], vec![]), |mut acc, (a, b, c)| {
                acc.0.push(a);
                acc.1.push(b);
                acc.2.push(c);
                acc
            });
        if xs.len() < MIN_BRANCH_POINTS {
            return Err(Error::InsufficientAsymptote {
                branch: name,
                needed: MIN_BRANCH_POINTS,
                found: xs.len(),
                threshold: ASYMPTOTE_THRESHOLD_QUANTA,
            });
        }
        let (slope, intercept) = line_fit(&xs, &ys)
            .ok_or_else(|| Error::Degenerate(format!("{name} branch has no bias spread")))?;
        Ok(BranchFit {
            slope,
            intercept,
            points: xs.len(),
            v_abs_min: vs.iter().cloned().fold(f64::INFINITY, f64::min),
            v_abs_max: vs.iter().cloned().fold(0.0, f64::max),
        })
    };
    let positive = branch(true, "positive")?;
    let negative = branch(false, "negative")?;
    let gain = 0.5 * (positive.slope + negative.slope);
    let offset = 0.5 * (positive.intercept + negative.intercept);
    if !(gain > 0.0) {
        return Err(Error::Degenerate(format!(
            "high-bias slope {gain:.6e} is not positive"
        )));
    }
    let n_sigma_off = Occupancy::new(offset / gain).map_err(|_| {
        Error::Degenerate(format!(
            "high-bias intercept implies negative added noise ({:.6e} quanta)",
            offset / gain
        ))
    })?;
    Ok(ShotStage1 {
        chain_gain: GainLinear::new(gain)?,
        n_sigma_off,
        positive,
        negative,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotFitOptions {
    pub t_init: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Relative half-width of the added-noise window around the stage-1 value.
    pub n_sigma_window: f64,
    pub max_iterations: usize,
    pub rel_cost_tol: f64,
}

impl Default for ShotFitOptions {
    fn default() -> Self {
        Self {
            t_init: 0.1,
            t_min: 1e-6,
            t_max: 1.0,
            n_sigma_window: 0.25,
            max_iterations: 200,
            rel_cost_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct ShotBoundFlags {
    pub n_sigma_lower: bool,
    pub n_sigma_upper: bool,
    pub temperature_lower: bool,
    pub temperature_upper: bool,
}

impl ShotBoundFlags {
    pub fn any(&self) -> bool {
        self.n_sigma_lower || self.n_sigma_upper || self.temperature_lower || self.temperature_upper
    }

    fn names(&self) -> Vec<&'static str> {
        let mut v = vec![];
        if self.n_sigma_lower {
            v.push("n_sigma_off_lower");
        }
        if self.n_sigma_upper {
            v.push("n_sigma_off_upper");
        }
        if self.temperature_lower {
            v.push("temperature_lower");
        }
        if self.temperature_upper {
            v.push("temperature_upper");
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotFitResult {
    pub chain_gain: GainLinear,
    pub n_sigma_off: Occupancy,
    pub source_temp: Temperature,
    /// Bias offset, V.
    pub v_offset: f64,
    /// RMS of `y - model` in the curve's y units.
    pub residual_rms: f64,
    /// Half the residual sum of squares in input-referred quanta².
    pub cost: f64,
    pub iterations: usize,
    pub bounds_active: ShotBoundFlags,
    pub warnings: Vec<String>,
    pub stage1: ShotStage1,
    /// `[lower, upper]` bounds applied to the added noise.
    pub n_sigma_bounds: [f64; 2],
}

impl ShotFitResult {
    pub fn predict(&self, bias: &[f64], f: Frequency) -> Vec<f64> {
        let model = ShotModel::new(bias, &[], self.chain_gain.ratio(), f);
        model.predict(&[
            self.n_sigma_off.quanta(),
            self.source_temp.kelvin(),
            self.v_offset,
        ])
    }
}

/// Stage-2 model `y = G_c·(N_sntj(V - V_off, T) + N_Σ')` with `G_c` frozen.
///
/// Parameters are `[N_Σ', T, V_off]` in quanta, kelvin and volts. Residuals
/// are `(model - y)/G_c`, i.e. in input-referred quanta.
pub struct ShotModel<'a> {
    bias: &'a [f64],
    y: &'a [f64],
    chain_gain: f64,
    f: Frequency,
}

impl<'a> ShotModel<'a> {
    pub fn new(bias: &'a [f64], y: &'a [f64], chain_gain: f64, f: Frequency) -> Self {
        Self {
            bias,
            y,
            chain_gain,
            f,
        }
    }

    fn terms(&self, v: f64, t: f64) -> (f64, f64, f64) {
        let t = Temperature::new(t.max(0.0)).expect("temperature kept inside bounds");
        sntj_occupancy_gradient(v, t, self.f).expect("finite bias")
    }

    pub fn predict(&self, p: &[f64]) -> Vec<f64> {
        self.bias
            .iter()
            .map(|&v| self.chain_gain * (self.terms(v - p[2], p[1]).0 + p[0]))
            .collect()
    }

    /// Jacobian of the model output (not the scaled residual) with respect
    /// to `[N_Σ', T, V_off]`.
    pub fn model_jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.bias.len(), 3);
        for (i, &v) in self.bias.iter().enumerate() {
            let (_, dv, dt) = self.terms(v - p[2], p[1]);
            j[(i, 0)] = self.chain_gain;
            j[(i, 1)] = self.chain_gain * dt;
            j[(i, 2)] = -self.chain_gain * dv;
        }
        j
    }
}

/// Solver-facing wrapper that works with the offset in microvolts so that
/// all three columns of the Jacobian have comparable magnitude.
struct ScaledShotProblem<'a>(ShotModel<'a>);

const UV: f64 = 1e-6;

impl LeastSquaresProblem for ScaledShotProblem<'_> {
    fn num_residuals(&self) -> usize {
        self.0.bias.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let m = &self.0;
        for ((o, &v), &y) in out.iter_mut().zip(m.bias).zip(m.y) {
            let n = m.terms(v - p[2] * UV, p[1]).0;
            *o = n + p[0] - y / m.chain_gain;
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        let m = &self.0;
        for (i, &v) in m.bias.iter().enumerate() {
            let (_, dv, dt) = m.terms(v - p[2] * UV, p[1]);
            out[(i, 0)] = 1.0;
            out[(i, 1)] = dt;
            out[(i, 2)] = -dv * UV;
        }
    }
}

/// Bounded fit of the central region with the chain gain frozen at the
/// stage-1 value.
pub fn fit_shot_stage2(
    curve: &NoiseCurve,
    f: Frequency,
    stage1: &ShotStage1,
    opts: &ShotFitOptions,
) -> Result<ShotFitResult> {
    require_volts(curve)?;
    let g = stage1.chain_gain.ratio();
    let n0 = stage1.n_sigma_off.quanta();
    let n_lo = (1.0 - opts.n_sigma_window) * n0;
    let n_hi = (1.0 + opts.n_sigma_window) * n0;
    let bounds = Bounds {
        lower: vec![n_lo, opts.t_min, f64::NEG_INFINITY],
        upper: vec![n_hi, opts.t_max, f64::INFINITY],
    };
    let problem = ScaledShotProblem(ShotModel::new(&curve.x, &curve.y, g, f));
    let settings = LmSettings {
        max_iterations: opts.max_iterations,
        rel_cost_tol: opts.rel_cost_tol,
    };
    let start = [n0, opts.t_init.clamp(opts.t_min, opts.t_max), 0.0];
    let rep = lm::minimize(&problem, &start, &bounds, settings);

    let at = |i: usize, lower: bool| {
        let v = rep.params[i];
        if lower {
            v <= bounds.lower[i]
        } else {
            v >= bounds.upper[i]
        }
    };
    let flags = ShotBoundFlags {
        n_sigma_lower: at(0, true),
        n_sigma_upper: at(0, false),
        temperature_lower: at(1, true),
        temperature_upper: at(1, false),
    };
    if !rep.converged {
        return Err(Error::NoConvergence {
            iterations: rep.iterations,
            cost: rep.cost,
            active_bounds: flags.names(),
        });
    }
    let warnings = flags
        .names()
        .into_iter()
        .map(|b| format!("parameter bound active at solution: {b}"))
        .collect();
    let residual_rms = g * (2.0 * rep.cost / curve.len() as f64).sqrt();
    Ok(ShotFitResult {
        chain_gain: stage1.chain_gain,
        n_sigma_off: Occupancy::new(rep.params[0])?,
        source_temp: Temperature::new(rep.params[1])?,
        v_offset: rep.params[2] * UV,
        residual_rms,
        cost: rep.cost,
        iterations: rep.iterations,
        bounds_active: flags,
        warnings,
        stage1: *stage1,
        n_sigma_bounds: [n_lo, n_hi],
    })
}

/// Both stages of the shot-noise fit.
pub fn fit_shot(curve: &NoiseCurve, f: Frequency, opts: &ShotFitOptions) -> Result<ShotFitResult> {
    let s1 = fit_shot_stage1(curve, f)?;
    fit_shot_stage2(curve, f, &s1, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JohnsonFitResult {
    pub chain_gain: GainLinear,
    pub n_sigma: Occupancy,
    pub residual_rms: f64,
    pub points: usize,
}

/// Least squares of `y = G·(½·coth(hf/2k_BT) + N_Σ)` over stage temperatures.
pub fn fit_johnson(points: &[(Temperature, f64)], f: Frequency) -> Result<JohnsonFitResult> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "Johnson fit needs at least 3 temperatures, got {}",
            points.len()
        )));
    }
    let occ: Vec<f64> = points
        .iter()
        .map(|(t, _)| johnson_occupancy(*t, f).quanta())
        .collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "Johnson output noise",
            value: *bad,
        });
    }
    let lo = occ.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = occ.iter().cloned().fold(0.0, f64::max);
    if hi < 3.0 * lo {
        return Err(Error::Degenerate(format!(
            "source occupancy spans {lo:.4}..{hi:.4} quanta, less than a factor 3"
        )));
    }
    let (gain, offset) = line_fit(&occ, &y)
        .ok_or_else(|| Error::Degenerate("no spread in source occupancy".into()))?;
    if !(gain > 0.0) {
        return Err(Error::Degenerate(format!(
            "fitted gain {gain:.6e} is not positive"
        )));
    }
    let n_sigma = Occupancy::new(offset / gain).map_err(|_| {
        Error::Degenerate(format!(
            "fitted added noise is negative ({:.6e} quanta)",
            offset / gain
        ))
    })?;
    let ss: f64 = occ
        .iter()
        .zip(&y)
        .map(|(n, y)| (y - gain * (n + n_sigma.quanta())).powi(2))
        .sum();
    Ok(JohnsonFitResult {
        chain_gain: GainLinear::new(gain)?,
        n_sigma,
        residual_rms: (ss / points.len() as f64).sqrt(),
        points: points.len(),
    })
}

/// [`fit_johnson`] on a curve against stage temperature.
pub fn fit_johnson_curve(curve: &NoiseCurve, f: Frequency) -> Result<JohnsonFitResult> {
    if curve.kind != AxisKind::Kelvin {
        return Err(Error::Degenerate(
            "Johnson fit needs a curve against stage temperature".into(),
        ));
    }
    let pts = curve
        .x
        .iter()
        .zip(&curve.y)
        .map(|(&t, &y)| Ok((Temperature::new(t)?, y)))
        .collect::<Result<Vec<_>>>()?;
    fit_johnson(&pts, f)
}
