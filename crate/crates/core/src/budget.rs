//! Inverse inference and power budgets.
//!
//! Follower-amplifier noise is recovered from the chain-added noise measured
//! with the parametric amplifier off, and the amplifier's excess noise from
//! the chain-added noise with it on. Both inversions subtract every other
//! stage's contribution as computed by the forward model, so they are exact
//! inverses of [`chain_added_noise_off`] and [`chain_added_noise`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chainmodel::{
    attribute, chain_added_noise, chain_added_noise_off, noise_rise, BandAverage, BandWindow,
    ChainConfig, ChainState, StageKind,
};
use crate::error::{finite, Error, Result};
use crate::profile::Profile;
use crate::quanta::{
    thermal_occupancy, Efficiency, Frequency, GainLinear, Occupancy, PowerDbm, PowerWatts,
    Temperature,
};

/// Relative slack below zero tolerated before an inferred noise counts as
/// negative; smaller values are rounding and are reported as zero.
const NEGATIVE_TOLERANCE: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Packaging efficiency

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PackagingEfficiency {
    /// `G_sntj / G_vts`.
    pub ratio: f64,
    /// Set when the ratio exceeds 1, i.e. no physical efficiency matches.
    pub exceeds_unity: bool,
}

impl PackagingEfficiency {
    /// The ratio as an efficiency; errors when it exceeds 1.
    pub fn efficiency(&self) -> Result<Efficiency> {
        Efficiency::new(self.ratio)
    }

    pub fn insertion_loss_db(&self) -> f64 {
        -10.0 * self.ratio.log10()
    }
}

/// Source-packaging transmission from the chain gains measured with the
/// packaged junction and with the bare Johnson source.
pub fn infer_packaging_efficiency(
    gain_sntj: GainLinear,
    gain_vts: GainLinear,
) -> Result<PackagingEfficiency> {
    let ratio = gain_sntj.ratio() / gain_vts.ratio();
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::OutOfRange {
            what: "packaging gain ratio",
            value: ratio,
            constraint: "must be finite and > 0",
        });
    }
    Ok(PackagingEfficiency {
        ratio,
        exceeds_unity: ratio > 1.0,
    })
}

/// Splits one measured transmission equally in dB between two planes.
pub fn split_equal_db(total: Efficiency) -> (Efficiency, Efficiency) {
    let half = Efficiency(total.eta().sqrt());
    (half, half)
}

// ---------------------------------------------------------------------------
// Follower and excess noise

fn check_len(cfg: &ChainConfig, n: usize, what: &str) -> Result<()> {
    if n != cfg.grid().len() {
        return Err(Error::InvalidChain(format!(
            "{what} has {n} values but the frequency grid has {}",
            cfg.grid().len()
        )));
    }
    Ok(())
}

fn follower_index(cfg: &ChainConfig) -> Result<usize> {
    cfg.follower_index()
        .ok_or_else(|| Error::InvalidChain("chain has no follower amplifier".into()))
}

/// Signed follower noise in quanta at each grid frequency.
fn follower_raw(cfg: &ChainConfig, n_sigma_off: &[f64]) -> Result<Vec<f64>> {
    let h = follower_index(cfg)?;
    let base = cfg.with_follower_noise(Profile::constant(0.0))?;
    base.grid()
        .iter()
        .zip(n_sigma_off)
        .map(|(&f, &n)| {
            let attr = attribute(&base.evaluate(f)?, ChainState::Off);
            Ok(attr.gain_before[h] * (n - attr.n_sigma()))
        })
        .collect()
}

/// Signed excess noise in quanta at each grid frequency. With `follower`
/// given, it replaces the configured follower noise (quanta per frequency).
fn excess_raw(cfg: &ChainConfig, n_sigma: &[f64], follower: Option<&[f64]>) -> Result<Vec<f64>> {
    let p = cfg.paramp_index().ok_or(Error::MissingParamAmp)?;
    let mut base = cfg.with_paramp_excess(Profile::constant(0.0))?;
    let h = match follower {
        Some(_) => {
            base = base.with_follower_noise(Profile::constant(0.0))?;
            Some(follower_index(cfg)?)
        }
        None => None,
    };
    base.grid()
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let attr = attribute(&base.evaluate(f)?, ChainState::On);
            let mut rest = attr.n_sigma();
            if let (Some(h), Some(nh)) = (h, follower) {
                rest += nh[i] / attr.gain_before[h];
            }
            Ok(attr.gain_before[p] * (n_sigma[i] - rest))
        })
        .collect()
}

fn non_negative(
    what: &'static str,
    raw: Vec<f64>,
    scale: &[f64],
    grid: &[Frequency],
) -> Result<Vec<Temperature>> {
    raw.into_iter()
        .zip(scale)
        .zip(grid)
        .map(|((v, s), f)| {
            if v < -NEGATIVE_TOLERANCE * s.abs().max(1.0) {
                return Err(Error::NegativeInference {
                    what,
                    value: v,
                    frequency_hz: f.hertz(),
                });
            }
            Ok(Temperature(v.max(0.0) * f.quantum_temperature()))
        })
        .collect()
}

/// Follower-amplifier noise temperature from the amplifier-off chain-added
/// noise at each grid frequency. The configured follower noise is ignored.
pub fn infer_follower_noise(
    cfg: &ChainConfig,
    n_sigma_off: &[Occupancy],
) -> Result<Vec<Temperature>> {
    check_len(cfg, n_sigma_off.len(), "off-state noise")?;
    let n: Vec<f64> = n_sigma_off.iter().map(|o| o.quanta()).collect();
    let raw = follower_raw(cfg, &n)?;
    non_negative("follower noise", raw, &n, cfg.grid())
}

/// Closed form for the cold-loss, warm-loss, amplifier, warm-loss, follower
/// topology with the amplifier off:
/// `N_H = η₂η₁ₕη₁꜀·N_Σ' − η₂η₁ₕ(1−η₁꜀)·N_c − η₂(1−η₁ₕ)·N_h − (1−η₂)·N_h`.
pub fn follower_noise_closed_form(
    n_sigma_off: Occupancy,
    eta_1c: Efficiency,
    eta_1h: Efficiency,
    eta_2: Efficiency,
    cold_bath: Temperature,
    hot_bath: Temperature,
    f: Frequency,
) -> Result<Temperature> {
    let (a, b, c) = (eta_1c.eta(), eta_1h.eta(), eta_2.eta());
    let n_c = thermal_occupancy(cold_bath, f).quanta();
    let n_h = thermal_occupancy(hot_bath, f).quanta();
    let n = c * b * a * n_sigma_off.quanta()
        - c * b * (1.0 - a) * n_c
        - c * (1.0 - b) * n_h
        - (1.0 - c) * n_h;
    non_negative("follower noise", vec![n], &[n_sigma_off.quanta()], &[f]).map(|v| v[0])
}

/// Amplifier excess noise temperature from the amplifier-on chain-added
/// noise at each grid frequency, with efficiencies, gain and follower noise
/// taken from `cfg`. The configured excess noise is ignored.
pub fn infer_excess_noise(cfg: &ChainConfig, t_sigma: &[Temperature]) -> Result<Vec<Temperature>> {
    check_len(cfg, t_sigma.len(), "chain-added noise")?;
    let n: Vec<f64> = t_sigma
        .iter()
        .zip(cfg.grid())
        .map(|(t, f)| t.kelvin() / f.quantum_temperature())
        .collect();
    let raw = excess_raw(cfg, &n, None)?;
    non_negative("excess noise", raw, &n, cfg.grid())
}

/// Chain-added noise temperature per grid frequency: amplifier-on when the
/// chain has a parametric amplifier, otherwise the passive chain.
pub fn predict_chain_noise(cfg: &ChainConfig) -> Result<Vec<Temperature>> {
    if cfg.paramp_index().is_some() {
        Ok(chain_added_noise(cfg)?.t_sigma())
    } else {
        Ok(chain_added_noise_off(cfg)?
            .into_iter()
            .zip(cfg.grid())
            .map(|(n, f)| Temperature(n.quanta() * f.quantum_temperature()))
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Budget report

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyBudget {
    pub frequency_hz: f64,
    pub t_h: f64,
    pub t_ex: f64,
    pub t_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub eta_p: Option<PackagingEfficiency>,
    pub band: BandWindow,
    pub points: Vec<FrequencyBudget>,
    pub t_h_band: f64,
    pub t_ex_band: f64,
    /// Per-stage breakdown of the chain rebuilt with the inferred noises.
    pub table: BandAverage,
}

/// Infers `T_H` from the off-state noise and then `T_ex` from the on-state
/// noise, and tabulates the rebuilt chain over the band.
pub fn budget_report(
    cfg: &ChainConfig,
    n_sigma_off: &[Occupancy],
    t_sigma: &[Temperature],
    packaging_gains: Option<(GainLinear, GainLinear)>,
) -> Result<BudgetReport> {
    let eta_p = packaging_gains
        .map(|(s, v)| infer_packaging_efficiency(s, v))
        .transpose()?;
    let t_h = infer_follower_noise(cfg, n_sigma_off)?;
    let with_h = cfg.with_follower_noise(per_grid_profile(cfg.grid(), &t_h)?)?;
    let t_ex = infer_excess_noise(&with_h, t_sigma)?;
    let rebuilt = with_h.with_paramp_excess(per_grid_profile(cfg.grid(), &t_ex)?)?;
    let table = chain_added_noise(&rebuilt)?.band_average()?;

    let band = cfg.band();
    let in_band: Vec<usize> = (0..cfg.grid().len())
        .filter(|&i| band.contains(cfg.grid()[i]))
        .collect();
    let band_mean = |v: &[Temperature]| {
        in_band.iter().map(|&i| v[i].kelvin()).sum::<f64>() / in_band.len() as f64
    };
    Ok(BudgetReport {
        eta_p,
        band,
        points: cfg
            .grid()
            .iter()
            .enumerate()
            .map(|(i, f)| FrequencyBudget {
                frequency_hz: f.hertz(),
                t_h: t_h[i].kelvin(),
                t_ex: t_ex[i].kelvin(),
                t_sigma: t_sigma[i].kelvin(),
            })
            .collect(),
        t_h_band: band_mean(&t_h),
        t_ex_band: band_mean(&t_ex),
        table,
    })
}

fn per_grid_profile(grid: &[Frequency], values: &[Temperature]) -> Result<Profile> {
    if grid.len() == 1 {
        return Ok(Profile::constant(values[0].kelvin()));
    }
    Profile::table(
        grid.iter()
            .zip(values)
            .map(|(f, t)| (f.hertz(), t.kelvin()))
            .collect(),
    )
}

impl BudgetReport {
    /// `cfg` with the inferred follower and excess noise filled in.
    pub fn apply(&self, cfg: &ChainConfig) -> Result<ChainConfig> {
        check_len(cfg, self.points.len(), "budget")?;
        let temps = |g: fn(&FrequencyBudget) -> f64| -> Vec<Temperature> {
            self.points.iter().map(|p| Temperature(g(p))).collect()
        };
        cfg.with_follower_noise(per_grid_profile(cfg.grid(), &temps(|p| p.t_h))?)?
            .with_paramp_excess(per_grid_profile(cfg.grid(), &temps(|p| p.t_ex))?)
    }

    /// Budget table CSV: one column per stage plus the total, rows for
    /// efficiency, insertion loss and the two noise referrals.
    pub fn table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidChain(format!("CSV encoding failed: {e}"));
        let mut header = vec!["quantity".to_string()];
        header.extend(self.table.stages.iter().map(|s| s.label.clone()));
        header.push("total".into());
        w.write_record(&header).map_err(io)?;

        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        let rows: [(&str, Vec<String>, String); 4] = [
            (
                "transmission_efficiency",
                self.table
                    .stages
                    .iter()
                    .map(|s| opt(s.efficiency))
                    .collect(),
                String::new(),
            ),
            (
                "insertion_loss_db",
                self.table
                    .stages
                    .iter()
                    .map(|s| opt(s.insertion_loss_db))
                    .collect(),
                String::new(),
            ),
            (
                "intrinsic_noise_k",
                self.table
                    .stages
                    .iter()
                    .map(|s| format!("{}", s.intrinsic_k))
                    .collect(),
                String::new(),
            ),
            (
                "input_referred_noise_k",
                self.table
                    .stages
                    .iter()
                    .map(|s| format!("{}", s.input_referred_k))
                    .collect(),
                format!("{}", self.table.t_sigma),
            ),
        ];
        for (name, cells, total) in rows {
            let mut rec = vec![name.to_string()];
            rec.extend(cells);
            rec.push(total);
            w.write_record(&rec).map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidChain(format!("CSV encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Standard deviations of independent Gaussian measurement errors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McPriors {
    /// Output-power calibration, dB; perturbs the measured noise rise.
    pub output_power_db: f64,
    /// Amplifier gain, dB; perturbs the gain assumed in the inversion.
    pub paramp_gain_db: f64,
    /// Source resistance, relative; scales the calibrated off-state noise.
    pub sntj_resistance_rel: f64,
    /// Loss-stage efficiencies, absolute; truncated to (0, 1].
    pub efficiency_abs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Stat {
        // Shifted by the first value so identical samples give exactly
        // zero spread.
        let first = values.clone().next().unwrap_or(0.0);
        let n = values.clone().count() as f64;
        let d_mean = values.clone().map(|v| v - first).sum::<f64>() / n;
        let var = values.map(|v| (v - first - d_mean).powi(2)).sum::<f64>() / (n - 1.0);
        Stat {
            mean: first + d_mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McPoint {
    pub frequency_hz: f64,
    pub t_sigma: Stat,
    pub t_h: Stat,
    pub t_ex: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub samples: usize,
    pub seed: u64,
    pub priors: McPriors,
    pub points: Vec<McPoint>,
    pub band_t_sigma: Stat,
    pub band_t_h: Stat,
    pub band_t_ex: Stat,
}

pub const MC_MIN_SAMPLES: usize = 100;

/// Seed for sample `index`, so each sample's stream is independent of how
/// the samples are scheduled.
fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
}

/// Absolute shift keeping every efficiency of the profile inside (0, 1].
fn efficiency_shift(rng: &mut ChaCha8Rng, sigma: f64, values: &[f64]) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    for _ in 0..1000 {
        let d = gaussian(rng, sigma);
        if values.iter().all(|v| v + d > 0.0 && v + d <= 1.0) {
            return d;
        }
    }
    0.0
}

struct Truth {
    rise: Vec<f64>,
    gain: Vec<f64>,
    n_off: Vec<f64>,
}

struct Sample {
    t_sigma: Vec<f64>,
    t_h: Vec<f64>,
    t_ex: Vec<f64>,
}

fn draw(cfg: &ChainConfig, truth: &Truth, priors: &McPriors, seed: u64) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_out = gaussian(&mut rng, priors.output_power_db);
    let d_gain = gaussian(&mut rng, priors.paramp_gain_db);
    let rho = loop {
        let r = 1.0 + gaussian(&mut rng, priors.sntj_resistance_rel);
        if r > 0.0 {
            break r;
        }
    };
    let gain_scale = 10f64.powf(d_gain / 10.0);
    let stages = cfg
        .stages()
        .iter()
        .cloned()
        .map(|mut s| {
            match &mut s.kind {
                StageKind::Loss { eta, idler_eta, .. } => {
                    let mut vals = eta.values();
                    if let Some(p) = idler_eta.as_ref() {
                        vals.extend(p.values());
                    }
                    let d = efficiency_shift(&mut rng, priors.efficiency_abs, &vals);
                    *eta = eta.map(|v| v + d);
                    if let Some(p) = idler_eta.as_mut() {
                        *p = p.map(|v| v + d);
                    }
                }
                StageKind::ParamAmp { gain, .. } => *gain = gain.map(|g| g * gain_scale),
                StageKind::Follower { .. } => {}
            }
            s
        })
        .collect();
    let sampled = cfg.with_stages(stages)?;

    let out_scale = 10f64.powf(d_out / 10.0);
    let n_off: Vec<f64> = truth.n_off.iter().map(|n| n * rho).collect();
    let n_on: Vec<f64> = (0..n_off.len())
        .map(|i| truth.rise[i] * out_scale * (n_off[i] + 0.5) / (truth.gain[i] * gain_scale) - 0.5)
        .collect();
    let n_h = follower_raw(&sampled, &n_off)?;
    let n_ex = excess_raw(&sampled, &n_on, Some(&n_h))?;
    let to_k = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(cfg.grid())
            .map(|(n, f)| n * f.quantum_temperature())
            .collect()
    };
    Ok(Sample {
        t_sigma: to_k(&n_on),
        t_h: to_k(&n_h),
        t_ex: to_k(&n_ex),
    })
}

/// Seeded Monte Carlo of the measurement-and-inversion pipeline.
///
/// Each sample perturbs the measured noise rise, the assumed amplifier gain,
/// the source calibration and the loss-stage efficiencies, then re-infers
/// `T_Σ`, `T_H` and `T_ex` exactly as a measurement would. Inferred noises
/// are kept signed so that the spread is not biased by clipping.
pub fn mc_uncertainty(
    cfg: &ChainConfig,
    priors: &McPriors,
    n_samples: usize,
    seed: u64,
) -> Result<McSummary> {
    if n_samples < MC_MIN_SAMPLES {
        return Err(Error::OutOfRange {
            what: "Monte Carlo sample count",
            value: n_samples as f64,
            constraint: "must be at least 100",
        });
    }
    for (what, v) in [
        ("output power prior", priors.output_power_db),
        ("amplifier gain prior", priors.paramp_gain_db),
        ("resistance prior", priors.sntj_resistance_rel),
        ("efficiency prior", priors.efficiency_abs),
    ] {
        if !(finite(what, v)? >= 0.0) {
            return Err(Error::OutOfRange {
                what,
                value: v,
                constraint: "standard deviation must be >= 0",
            });
        }
    }
    let p = cfg.paramp_index().ok_or(Error::MissingParamAmp)?;
    follower_index(cfg)?;

    let on = chain_added_noise(cfg)?.n_sigma();
    let off = chain_added_noise_off(cfg)?;
    let gain: Vec<f64> = cfg
        .grid()
        .iter()
        .map(|&f| match &cfg.stages()[p].kind {
            StageKind::ParamAmp { gain, .. } => gain.at(f.hertz()),
            _ => unreachable!(),
        })
        .collect();
    let rise = on
        .iter()
        .zip(&off)
        .zip(&gain)
        .map(|((&a, &b), &g)| noise_rise(a, b, GainLinear(g)))
        .collect::<Result<Vec<_>>>()?;
    let truth = Truth {
        rise,
        gain,
        n_off: off.iter().map(|o| o.quanta()).collect(),
    };

    let samples = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| draw(cfg, &truth, priors, sample_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;

    let grid = cfg.grid();
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, f)| McPoint {
            frequency_hz: f.hertz(),
            t_sigma: Stat::of(samples.iter().map(move |s| s.t_sigma[i])),
            t_h: Stat::of(samples.iter().map(move |s| s.t_h[i])),
            t_ex: Stat::of(samples.iter().map(move |s| s.t_ex[i])),
        })
        .collect();
    let band = cfg.band();
    let in_band: Vec<usize> = (0..grid.len())
        .filter(|&i| band.contains(grid[i]))
        .collect();
    if in_band.is_empty() {
        return Err(Error::InvalidChain(
            "no grid frequency inside the band window".into(),
        ));
    }
    let avg = |v: &[f64]| in_band.iter().map(|&i| v[i]).sum::<f64>() / in_band.len() as f64;
    Ok(McSummary {
        samples: n_samples,
        seed,
        priors: *priors,
        points,
        band_t_sigma: Stat::of(samples.iter().map(|s| avg(&s.t_sigma))),
        band_t_h: Stat::of(samples.iter().map(|s| avg(&s.t_h))),
        band_t_ex: Stat::of(samples.iter().map(|s| avg(&s.t_ex))),
    })
}

// ---------------------------------------------------------------------------
// Power budgets

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DcPower {
    pub power: PowerWatts,
    pub resistance_ohm: f64,
}

/// Dissipated dc power and the implied resistance `V/I`.
pub fn dc_power(v_d: f64, i_d: f64) -> Result<DcPower> {
    finite("bias voltage", v_d)?;
    finite("bias current", i_d)?;
    if i_d == 0.0 {
        return Err(Error::ZeroCurrent);
    }
    Ok(DcPower {
        power: PowerWatts::new(v_d * i_d)?,
        resistance_ohm: v_d / i_d,
    })
}

/// One element of a pump line, listed from the generator towards the device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PumpElement {
    Attenuator {
        label: String,
        attenuation_db: f64,
        stage_temp_k: f64,
    },
    /// Directional coupler fed through its coupled port; the uncoupled part
    /// of the pump is absorbed by the termination.
    Coupler {
        label: String,
        coupling_db: f64,
        stage_temp_k: f64,
        termination_temp_k: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerEntry {
    pub label: String,
    pub stage_temp: Temperature,
    pub dissipated: PowerWatts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTotal {
    pub stage_temp: Temperature,
    pub dissipated: PowerWatts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PumpBudget {
    pub delivered: PowerWatts,
    /// Power leaving the generator.
    pub input: PowerWatts,
    pub entries: Vec<PowerEntry>,
    /// Sorted by ascending stage temperature.
    pub by_stage: Vec<StageTotal>,
}

impl PumpBudget {
    pub fn total_dissipated(&self) -> f64 {
        self.entries.iter().map(|e| e.dissipated.watts()).sum()
    }
}

/// Back-propagates the power delivered at the device through the pump line
/// and books what every element dissipates at its temperature stage.
pub fn pump_dissipation(delivered: PowerDbm, path: &[PumpElement]) -> Result<PumpBudget> {
    let mut p = delivered.to_watts().watts();
    let mut entries = Vec::with_capacity(path.len());
    for el in path.iter().rev() {
        let (label, db, temp) = match el {
            PumpElement::Attenuator {
                label,
                attenuation_db,
                stage_temp_k,
            } => (label, *attenuation_db, *stage_temp_k),
            PumpElement::Coupler {
                label,
                coupling_db,
                termination_temp_k,
                ..
            } => (label, *coupling_db, *termination_temp_k),
        };
        if !(finite("attenuation", db)? >= 0.0) {
            return Err(Error::OutOfRange {
                what: "attenuation",
                value: db,
                constraint: "must be >= 0 dB",
            });
        }
        let p_in = p * 10f64.powf(db / 10.0);
        entries.push(PowerEntry {
            label: label.clone(),
            stage_temp: Temperature::new(temp)?,
            dissipated: PowerWatts(p_in - p),
        });
        p = p_in;
    }
    entries.reverse();

    let mut by_stage: Vec<StageTotal> = Vec::new();
    for e in &entries {
        match by_stage
            .iter_mut()
            .find(|s| s.stage_temp.kelvin() == e.stage_temp.kelvin())
        {
            Some(s) => s.dissipated = PowerWatts(s.dissipated.watts() + e.dissipated.watts()),
            None => by_stage.push(StageTotal {
                stage_temp: e.stage_temp,
                dissipated: e.dissipated,
            }),
        }
    }
    by_stage.sort_by(|a, b| a.stage_temp.kelvin().total_cmp(&b.stage_temp.kelvin()));
    Ok(PumpBudget {
        delivered: delivered.to_watts(),
        input: PowerWatts(p),
        entries,
        by_stage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chainmodel::{IdlerMode, Stage};
    use approx::assert_relative_eq;

    fn ghz(v: f64) -> Frequency {
        Frequency::from_ghz(v).unwrap()
    }

    fn k(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    fn eta(v: f64) -> Efficiency {
        Efficiency::new(v).unwrap()
    }

    fn chain(etas: [f64; 3], g: f64, t_ex: f64, t_h: f64, grid: Vec<Frequency>) -> ChainConfig {
        ChainConfig::new(
            vec![
                Stage::loss("eta_1c", Profile::constant(etas[0]), k(0.03)),
                Stage::loss("eta_1h", Profile::constant(etas[1]), k(4.0)),
                Stage::paramp(
                    "twpa",
                    Profile::constant(g),
                    Profile::constant(t_ex),
                    ghz(8.979),
                ),
                Stage::loss("eta_2", Profile::constant(etas[2]), k(4.0)),
                Stage::follower("hemt", Profile::constant(1e4), Profile::constant(t_h)),
            ],
            grid,
            IdlerMode::SameAsSignal,
        )
        .unwrap()
    }

    fn reference_chain() -> ChainConfig {
        let grid = crate::chainmodel::linear_grid(3.5e9, 5.5e9, 21).unwrap();
        chain([0.8, 0.8, 0.61], 10f64.powf(1.8), 1.9, 13.4, grid)
    }

    #[test]
    fn packaging_efficiency() {
        let g = |v| GainLinear::new(v).unwrap();
        let same = infer_packaging_efficiency(g(1e6), g(1e6)).unwrap();
        assert_eq!(same.ratio, 1.0);
        assert!(!same.exceeds_unity);
        let p = infer_packaging_efficiency(g(0.93e6), g(1e6)).unwrap();
        assert_relative_eq!(p.ratio, 0.93, max_relative = 1e-12);
        assert!((p.insertion_loss_db() - 0.3).abs() < 0.02);
        let high = infer_packaging_efficiency(g(1.1e6), g(1e6)).unwrap();
        assert!(high.exceeds_unity);
        assert!(high.efficiency().is_err());
    }

    #[test]
    fn equal_db_split() {
        let (a, b) = split_equal_db(eta(0.81));
        assert_relative_eq!(a.eta(), 0.9, max_relative = 1e-12);
        assert_relative_eq!(
            a.insertion_loss_db() + b.insertion_loss_db(),
            eta(0.81).insertion_loss_db(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn follower_round_trip() {
        let cfg = reference_chain();
        let off = chain_added_noise_off(&cfg).unwrap();
        let t_h = infer_follower_noise(&cfg, &off).unwrap();
        for t in t_h {
            assert_relative_eq!(t.kelvin(), 13.4, max_relative = 1e-9);
        }
    }

    #[test]
    fn follower_closed_form_matches_general() {
        let cfg = reference_chain();
        let off = chain_added_noise_off(&cfg).unwrap();
        for (n, f) in off.iter().zip(cfg.grid()) {
            let t =
                follower_noise_closed_form(*n, eta(0.8), eta(0.8), eta(0.61), k(0.03), k(4.0), *f)
                    .unwrap();
            assert_relative_eq!(t.kelvin(), 13.4, max_relative = 1e-9);
        }
        // Lossless chain: everything is the follower's.
        let n = Occupancy::new(20.0).unwrap();
        let t =
            follower_noise_closed_form(n, eta(1.0), eta(1.0), eta(1.0), k(0.03), k(4.0), ghz(4.5))
                .unwrap();
        assert_relative_eq!(
            t.kelvin(),
            20.0 * ghz(4.5).quantum_temperature(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn negative_follower_is_error() {
        let cfg = reference_chain();
        let tiny = vec![Occupancy::new(1.0).unwrap(); cfg.grid().len()];
        assert!(matches!(
            infer_follower_noise(&cfg, &tiny),
            Err(Error::NegativeInference { .. })
        ));
    }

    #[test]
    fn excess_round_trip_and_zero() {
        let cfg = reference_chain();
        let t_sigma = chain_added_noise(&cfg).unwrap().t_sigma();
        for t in infer_excess_noise(&cfg, &t_sigma).unwrap() {
            assert_relative_eq!(t.kelvin(), 1.9, max_relative = 1e-9);
        }
        let quiet = cfg.with_paramp_excess(Profile::constant(0.0)).unwrap();
        let t_sigma = chain_added_noise(&quiet).unwrap().t_sigma();
        for t in infer_excess_noise(&quiet, &t_sigma).unwrap() {
            assert!(t.kelvin().abs() < 1e-9);
        }
    }

    #[test]
    fn excess_from_reported_total() {
        // With the reported 6.3 K total and the remaining parameters as
        // tabulated, the inferred excess lands near 1.9 K.
        let cfg = chain([0.8, 0.8, 0.61], 10f64.powf(1.8), 0.0, 13.4, vec![ghz(4.5)]);
        let t_ex = infer_excess_noise(&cfg, &[k(6.3)]).unwrap()[0].kelvin();
        assert!((t_ex - 1.9).abs() < 0.2, "{t_ex}");
        let referred = t_ex / (0.8 * 0.8);
        assert!((referred - 2.9).abs() < 0.3, "{referred}");
    }

    #[test]
    fn predict_wraps_forward_model() {
        let cfg = reference_chain();
        let direct = chain_added_noise(&cfg).unwrap().t_sigma();
        assert_eq!(predict_chain_noise(&cfg).unwrap(), direct);

        let hemt_only = ChainConfig::new(
            vec![
                Stage::loss("pkg", Profile::constant(1.0), k(4.0)),
                Stage::follower("hemt", Profile::constant(1e4), Profile::constant(0.0)),
            ],
            vec![ghz(4.5)],
            IdlerMode::SameAsSignal,
        )
        .unwrap();
        assert_eq!(predict_chain_noise(&hemt_only).unwrap()[0].kelvin(), 0.0);
    }

    #[test]
    fn report_recovers_parameters() {
        let cfg = reference_chain();
        let off = chain_added_noise_off(&cfg).unwrap();
        let on = chain_added_noise(&cfg).unwrap().t_sigma();
        let blank = cfg
            .with_follower_noise(Profile::constant(0.0))
            .unwrap()
            .with_paramp_excess(Profile::constant(0.0))
            .unwrap();
        let g = GainLinear::new(1.0).unwrap();
        let rep = budget_report(&blank, &off, &on, Some((g, g))).unwrap();
        assert_relative_eq!(rep.t_h_band, 13.4, max_relative = 1e-9);
        assert_relative_eq!(rep.t_ex_band, 1.9, max_relative = 1e-9);
        let csv = rep.table_csv().unwrap();
        assert!(csv.starts_with("quantity,eta_1c,eta_1h,twpa,eta_2,hemt,total\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn mc_zero_width_and_determinism() {
        let cfg = reference_chain();
        let s = mc_uncertainty(&cfg, &McPriors::default(), 100, 1).unwrap();
        assert_eq!(s.band_t_sigma.std, 0.0);
        assert_eq!(s.band_t_h.std, 0.0);
        assert_relative_eq!(s.band_t_h.mean, 13.4, max_relative = 1e-9);
        assert_relative_eq!(s.band_t_ex.mean, 1.9, max_relative = 1e-9);

        let priors = McPriors {
            output_power_db: 0.3,
            efficiency_abs: 0.02,
            ..Default::default()
        };
        let a = mc_uncertainty(&cfg, &priors, 200, 7).unwrap();
        let b = mc_uncertainty(&cfg, &priors, 200, 7).unwrap();
        assert_eq!(a, b);
        assert!(mc_uncertainty(&cfg, &priors, 99, 7).is_err());
    }

    #[test]
    fn mc_output_power_spread() {
        let cfg = reference_chain();
        let priors = McPriors {
            output_power_db: 0.3,
            ..Default::default()
        };
        let s = mc_uncertainty(&cfg, &priors, 10_000, 2024).unwrap();
        let std = s.band_t_sigma.std;
        assert!((0.4..=0.5).contains(&std), "{std}");
    }

    #[test]
    fn dc_power_examples() {
        let p = dc_power(100e-6, 1e-3).unwrap();
        assert_relative_eq!(p.power.watts(), 100e-9, max_relative = 1e-12);
        assert_relative_eq!(p.resistance_ohm, 0.1, max_relative = 1e-12);
        let p = dc_power(80e-6, 1e-3).unwrap();
        assert_relative_eq!(p.resistance_ohm, 0.08, max_relative = 1e-12);
        let p = dc_power(0.0, 1e-3).unwrap();
        assert_eq!((p.power.watts(), p.resistance_ohm), (0.0, 0.0));
        let p = dc_power(1.5, 1.5e-3).unwrap();
        assert_relative_eq!(p.power.watts(), 2.25e-3, max_relative = 1e-12);
        assert_relative_eq!(p.resistance_ohm, 1000.0, max_relative = 1e-12);
        assert_eq!(dc_power(1e-6, 0.0), Err(Error::ZeroCurrent));
    }

    fn reference_path() -> Vec<PumpElement> {
        vec![
            PumpElement::Attenuator {
                label: "att_10db".into(),
                attenuation_db: 10.0,
                stage_temp_k: 4.0,
            },
            PumpElement::Coupler {
                label: "dc_10db".into(),
                coupling_db: 10.0,
                stage_temp_k: 0.03,
                termination_temp_k: 4.0,
            },
        ]
    }

    #[test]
    fn pump_reference_path() {
        let b = pump_dissipation(PowerDbm::new(-30.0).unwrap(), &reference_path()).unwrap();
        assert_relative_eq!(b.entries[0].dissipated.watts(), 90e-6, max_relative = 1e-12);
        assert_relative_eq!(b.entries[1].dissipated.watts(), 9e-6, max_relative = 1e-12);
        assert_eq!(b.by_stage.len(), 1);
        assert_relative_eq!(
            b.by_stage[0].dissipated.watts(),
            99e-6,
            max_relative = 1e-12
        );
        assert_relative_eq!(b.input.watts(), 100e-6, max_relative = 1e-12);
    }

    #[test]
    fn pump_simple_paths() {
        let b = pump_dissipation(PowerDbm::new(-30.0).unwrap(), &[]).unwrap();
        assert_eq!(b.total_dissipated(), 0.0);
        let path = [PumpElement::Attenuator {
            label: "a".into(),
            attenuation_db: 3.0,
            stage_temp_k: 4.0,
        }];
        let b = pump_dissipation(PowerDbm::new(-30.0).unwrap(), &path).unwrap();
        assert!((b.input.watts() - 1.995e-6).abs() < 1e-9);
        assert!((b.total_dissipated() - 0.995e-6).abs() < 1e-9);
        let bad = [PumpElement::Attenuator {
            label: "a".into(),
            attenuation_db: -1.0,
            stage_temp_k: 4.0,
        }];
        assert!(pump_dissipation(PowerDbm::new(-30.0).unwrap(), &bad).is_err());
    }
}
