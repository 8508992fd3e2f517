//! Cascade engine for loss/amplifier chains in photon-number units.
//!
//! A chain is an ordered list of [`Stage`]s. Loss stages mix the travelling
//! field with a thermal bath (`out = η·in + (1-η)·N_bath`), a parametric
//! amplifier mixes signal and idler (`out = G·(N_s + N_ex^s) + (G-1)·(N_i + N_ex^i)`),
//! and follower amplifiers add their own noise before amplifying
//! (`out = G_H·(in + N_H)`).
//!
//! Two evaluation routes coexist:
//!
//! * [`propagate_exact`] pushes occupancies stage by stage, including the
//!   idler path, and is authoritative at any gain.
//! * [`chain_added_noise`] sums closed-form input-referred contributions per
//!   stage in the high-gain limit (idler terms not reduced by `(G-1)/G`),
//!   which is what per-stage attribution tables are built from.
//!
//! The idler enters the chain input in vacuum and traverses every loss stage
//! in front of the amplifier. The idler vacuum contribution is attributed to
//! the first stage of the chain.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::quanta::{
    occupancy_to_temperature, temperature_to_occupancy, thermal_occupancy, Efficiency, Frequency,
    GainLinear, Occupancy, Temperature, VACUUM_QUANTA,
};
use crate::scalar::Scalar;

/// Gain below which the high-gain closed form is flagged as approximate.
pub const HIGH_GAIN_THRESHOLD: f64 = 10.0;

/// How idler-path efficiencies and bath occupancies are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdlerMode {
    /// Idler sees the signal efficiency and bath occupancy at the signal frequency.
    #[default]
    SameAsSignal,
    /// Loss stages carry an explicit idler efficiency table (indexed by signal
    /// frequency); stages without one fall back to the signal efficiency.
    Explicit,
    /// Efficiency and bath occupancy are evaluated at `f_i = f_p - f_s`.
    IdlerFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageKind<T = f64> {
    Loss {
        eta: Profile<T>,
        idler_eta: Option<Profile<T>>,
        bath: Temperature<T>,
    },
    /// Gain is linear; excess noise temperatures use the `T = N·hf/k_B`
    /// convention at the signal frequency.
    ParamAmp {
        gain: Profile<T>,
        excess_signal_k: Profile<T>,
        excess_idler_k: Profile<T>,
        pump: Frequency<T>,
    },
    Follower {
        gain: Profile<T>,
        added_k: Profile<T>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageRole {
    Loss,
    ParamAmp,
    Follower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage<T = f64> {
    pub label: String,
    pub kind: StageKind<T>,
}

impl<T: Scalar> Stage<T> {
    pub fn loss(label: impl Into<String>, eta: Profile<T>, bath: Temperature<T>) -> Self {
        Stage {
            label: label.into(),
            kind: StageKind::Loss {
                eta,
                idler_eta: None,
                bath,
            },
        }
    }

    /// Parametric amplifier whose total excess noise is split equally
    /// between the signal-to-signal and idler-to-signal paths.
    pub fn paramp(
        label: impl Into<String>,
        gain: Profile<T>,
        excess_k: Profile<T>,
        pump: Frequency<T>,
    ) -> Self {
        let half = excess_k.map(|v| v * T::half());
        Stage {
            label: label.into(),
            kind: StageKind::ParamAmp {
                gain,
                excess_signal_k: half.clone(),
                excess_idler_k: half,
                pump,
            },
        }
    }

    pub fn follower(label: impl Into<String>, gain: Profile<T>, added_k: Profile<T>) -> Self {
        Stage {
            label: label.into(),
            kind: StageKind::Follower { gain, added_k },
        }
    }

    pub fn with_idler_eta(mut self, profile: Profile<T>) -> Self {
        if let StageKind::Loss { idler_eta, .. } = &mut self.kind {
            *idler_eta = Some(profile);
        }
        self
    }

    pub fn role(&self) -> StageRole {
        match self.kind {
            StageKind::Loss { .. } => StageRole::Loss,
            StageKind::ParamAmp { .. } => StageRole::ParamAmp,
            StageKind::Follower { .. } => StageRole::Follower,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::InvalidChain(format!(
                "stage '{}': {msg}",
                self.label
            )))
        };
        let check_eta = |p: &Profile<T>, name: &str| -> Result<()> {
            for v in p.values() {
                if Efficiency::new(v).is_err() {
                    return bad(format!("{name} {v} outside (0, 1]"));
                }
            }
            Ok(())
        };
        let check_gain = |p: &Profile<T>| -> Result<()> {
            for v in p.values() {
                if !(v >= T::one()) || !v.is_finite() {
                    return bad(format!("amplifier gain {v} must be >= 1 (linear)"));
                }
            }
            Ok(())
        };
        let check_noise = |p: &Profile<T>, name: &str| -> Result<()> {
            for v in p.values() {
                if !(v >= T::zero()) || !v.is_finite() {
                    return bad(format!(
                        "{name} {v} must be a finite non-negative temperature"
                    ));
                }
            }
            Ok(())
        };
        match &self.kind {
            StageKind::Loss { eta, idler_eta, .. } => {
                check_eta(eta, "efficiency")?;
                if let Some(p) = idler_eta {
                    check_eta(p, "idler efficiency")?;
                }
            }
            StageKind::ParamAmp {
                gain,
                excess_signal_k,
                excess_idler_k,
                ..
            } => {
                check_gain(gain)?;
                check_noise(excess_signal_k, "excess noise")?;
                check_noise(excess_idler_k, "excess noise")?;
            }
            StageKind::Follower { gain, added_k } => {
                check_gain(gain)?;
                check_noise(added_k, "added noise")?;
            }
        }
        Ok(())
    }
}

/// Frequency window for band averages, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandWindow<T = f64> {
    pub lo_hz: T,
    pub hi_hz: T,
}

impl<T: Scalar> BandWindow<T> {
    pub fn new(lo_hz: T, hi_hz: T) -> Result<Self> {
        if !(lo_hz.is_finite() && hi_hz.is_finite() && lo_hz < hi_hz) {
            return Err(Error::InvalidChain(format!(
                "band window must satisfy lo < hi (got {lo_hz}..{hi_hz})"
            )));
        }
        Ok(Self { lo_hz, hi_hz })
    }

    pub fn contains(&self, f: Frequency<T>) -> bool {
        f.hertz() >= self.lo_hz && f.hertz() <= self.hi_hz
    }
}

impl<T: Scalar> Default for BandWindow<T> {
    fn default() -> Self {
        Self {
            lo_hz: T::lit(3.5e9),
            hi_hz: T::lit(5.5e9),
        }
    }
}

/// Evenly spaced grid including both end points.
pub fn linear_grid<T: Scalar>(start_hz: T, stop_hz: T, points: usize) -> Result<Vec<Frequency<T>>> {
    if points == 0 {
        return Err(Error::InvalidChain(
            "frequency grid needs at least one point".into(),
        ));
    }
    if points == 1 {
        return Ok(vec![Frequency::new(start_hz)?]);
    }
    let step = (stop_hz - start_hz) / T::from_usize(points - 1).unwrap();
    (0..points)
        .map(|i| Frequency::new(start_hz + step * T::from_usize(i).unwrap()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainConfig<T = f64> {
    stages: Vec<Stage<T>>,
    grid: Vec<Frequency<T>>,
    idler_mode: IdlerMode,
    band: BandWindow<T>,
}

impl<T: Scalar> ChainConfig<T> {
    pub fn new(
        stages: Vec<Stage<T>>,
        grid: Vec<Frequency<T>>,
        idler_mode: IdlerMode,
    ) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidChain("chain has no stages".into()));
        }
        if grid.is_empty() {
            return Err(Error::InvalidChain("frequency grid is empty".into()));
        }
        if grid.windows(2).any(|w| !(w[1].hertz() > w[0].hertz())) {
            return Err(Error::InvalidChain(
                "frequency grid must be strictly increasing".into(),
            ));
        }
        for s in &stages {
            s.validate()?;
        }
        let amps: Vec<usize> = stages
            .iter()
            .enumerate()
            .filter(|(_, s)| s.role() == StageRole::ParamAmp)
            .map(|(i, _)| i)
            .collect();
        if amps.len() > 1 {
            return Err(Error::InvalidChain(format!(
                "at most one parametric amplifier allowed, found {}",
                amps.len()
            )));
        }
        if let Some(&p) = amps.first() {
            if let Some(s) = stages[..p].iter().find(|s| s.role() != StageRole::Loss) {
                return Err(Error::InvalidChain(format!(
                    "stage '{}' precedes the parametric amplifier but is not a loss stage",
                    s.label
                )));
            }
        }
        Ok(Self {
            stages,
            grid,
            idler_mode,
            band: BandWindow::default(),
        })
    }

    pub fn with_band(mut self, band: BandWindow<T>) -> Self {
        self.band = band;
        self
    }

    pub fn with_grid(&self, grid: Vec<Frequency<T>>) -> Result<Self> {
        Ok(Self::new(self.stages.clone(), grid, self.idler_mode)?.with_band(self.band))
    }

    pub fn stages(&self) -> &[Stage<T>] {
        &self.stages
    }

    pub fn grid(&self) -> &[Frequency<T>] {
        &self.grid
    }

    pub fn idler_mode(&self) -> IdlerMode {
        self.idler_mode
    }

    pub fn band(&self) -> BandWindow<T> {
        self.band
    }

    pub fn paramp_index(&self) -> Option<usize> {
        self.stages
            .iter()
            .position(|s| s.role() == StageRole::ParamAmp)
    }

    pub fn follower_index(&self) -> Option<usize> {
        self.stages
            .iter()
            .position(|s| s.role() == StageRole::Follower)
    }

    /// Copy with the parametric amplifier's gain replaced.
    pub fn with_paramp_gain(&self, new_gain: Profile<T>) -> Result<Self> {
        let p = self.paramp_index().ok_or(Error::MissingParamAmp)?;
        let mut stages = self.stages.clone();
        if let StageKind::ParamAmp { gain, .. } = &mut stages[p].kind {
            *gain = new_gain;
        }
        Ok(Self::new(stages, self.grid.clone(), self.idler_mode)?.with_band(self.band))
    }

    /// Copy with the total excess noise replaced (split equally between paths).
    pub fn with_paramp_excess(&self, excess_k: Profile<T>) -> Result<Self> {
        let p = self.paramp_index().ok_or(Error::MissingParamAmp)?;
        let mut stages = self.stages.clone();
        if let StageKind::ParamAmp {
            excess_signal_k,
            excess_idler_k,
            ..
        } = &mut stages[p].kind
        {
            let half = excess_k.map(|v| v * T::half());
            *excess_signal_k = half.clone();
            *excess_idler_k = half;
        }
        Ok(Self::new(stages, self.grid.clone(), self.idler_mode)?.with_band(self.band))
    }

    /// Copy with the first follower amplifier's added noise replaced.
    pub fn with_follower_noise(&self, added: Profile<T>) -> Result<Self> {
        let h = self
            .follower_index()
            .ok_or_else(|| Error::InvalidChain("chain has no follower amplifier".into()))?;
        let mut stages = self.stages.clone();
        if let StageKind::Follower { added_k, .. } = &mut stages[h].kind {
            *added_k = added;
        }
        Ok(Self::new(stages, self.grid.clone(), self.idler_mode)?.with_band(self.band))
    }

    pub(crate) fn with_stages(&self, stages: Vec<Stage<T>>) -> Result<Self> {
        Ok(Self::new(stages, self.grid.clone(), self.idler_mode)?.with_band(self.band))
    }

    /// Stage parameters evaluated at one signal frequency.
    pub(crate) fn evaluate(&self, f: Frequency<T>) -> Result<Vec<StagePoint<T>>> {
        let fs = f.hertz();
        let idler_freq = match (self.idler_mode, self.paramp_index()) {
            (IdlerMode::IdlerFrequency, Some(p)) => {
                let StageKind::ParamAmp { pump, .. } = &self.stages[p].kind else {
                    unreachable!()
                };
                let fi = pump.hertz() - fs;
                Some(Frequency::new(fi).map_err(|_| {
                    Error::InvalidChain(format!(
                        "idler frequency f_p - f_s = {fi} Hz is not positive at f_s = {fs} Hz"
                    ))
                })?)
            }
            (IdlerMode::IdlerFrequency, None) | (IdlerMode::Explicit, None) => {
                return Err(Error::MissingParamAmp)
            }
            _ => None,
        };
        let points = self
            .stages
            .iter()
            .map(|s| match &s.kind {
                StageKind::Loss {
                    eta,
                    idler_eta,
                    bath,
                } => {
                    let eta_s = eta.at(fs);
                    let n_bath = thermal_occupancy(*bath, f).quanta();
                    let (eta_idler, n_bath_idler) = match (self.idler_mode, idler_freq) {
                        (IdlerMode::IdlerFrequency, Some(fi)) => {
                            (eta.at(fi.hertz()), thermal_occupancy(*bath, fi).quanta())
                        }
                        (IdlerMode::Explicit, _) => {
                            (idler_eta.as_ref().map_or(eta_s, |p| p.at(fs)), n_bath)
                        }
                        _ => (eta_s, n_bath),
                    };
                    StagePoint::Loss {
                        eta: eta_s,
                        n_bath,
                        eta_idler,
                        n_bath_idler,
                    }
                }
                StageKind::ParamAmp {
                    gain,
                    excess_signal_k,
                    excess_idler_k,
                    ..
                } => StagePoint::Amp {
                    gain: gain.at(fs),
                    excess_signal: k_to_quanta(excess_signal_k.at(fs), f),
                    excess_idler: k_to_quanta(excess_idler_k.at(fs), f),
                },
                StageKind::Follower { gain, added_k } => StagePoint::Follower {
                    gain: gain.at(fs),
                    added: k_to_quanta(added_k.at(fs), f),
                },
            })
            .collect();
        Ok(points)
    }
}

fn k_to_quanta<T: Scalar>(kelvin: T, f: Frequency<T>) -> T {
    temperature_to_occupancy(Temperature(kelvin), f).quanta()
}

fn quanta_to_k<T: Scalar>(quanta: T, f: Frequency<T>) -> Temperature<T> {
    occupancy_to_temperature(Occupancy(quanta), f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StagePoint<T> {
    Loss {
        eta: T,
        n_bath: T,
        eta_idler: T,
        n_bath_idler: T,
    },
    Amp {
        gain: T,
        excess_signal: T,
        excess_idler: T,
    },
    Follower {
        gain: T,
        added: T,
    },
}

impl<T: Scalar> StagePoint<T> {
    /// Power gain the signal sees through this stage.
    fn signal_gain(&self, amp_on: bool) -> T {
        match *self {
            StagePoint::Loss { eta, .. } => eta,
            StagePoint::Amp { gain, .. } => {
                if amp_on {
                    gain
                } else {
                    T::one()
                }
            }
            StagePoint::Follower { gain, .. } => gain,
        }
    }
}

// ---------------------------------------------------------------------------
// Elementary stage relations

/// Mean signal output of a phase-insensitive parametric amplifier,
/// `G·N_s + (G-1)·N_i`.
pub fn paramp_output<T: Scalar>(
    n_sig: Occupancy<T>,
    n_idl: Occupancy<T>,
    g: GainLinear<T>,
) -> Result<Occupancy<T>> {
    let g = g.ratio();
    if !(g >= T::one()) {
        return Err(Error::OutOfRange {
            what: "parametric gain",
            value: g.to_f64_lossy(),
            constraint: "must be >= 1",
        });
    }
    Ok(Occupancy(
        g * n_sig.quanta() + (g - T::one()) * n_idl.quanta(),
    ))
}

/// Beamsplitter loss, `η·N_in + (1-η)·N_bath`.
pub fn loss_stage<T: Scalar>(
    n_in: Occupancy<T>,
    eta: Efficiency<T>,
    n_bath: Occupancy<T>,
) -> Occupancy<T> {
    let eta = eta.eta();
    Occupancy(eta * n_in.quanta() + (T::one() - eta) * n_bath.quanta())
}

// ---------------------------------------------------------------------------
// Exact propagation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageState<T = f64> {
    pub label: String,
    /// Signal occupancy at the stage output.
    pub signal: Occupancy<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactPropagation<T = f64> {
    pub frequency: Frequency<T>,
    pub input: Occupancy<T>,
    pub stages: Vec<StageState<T>>,
    /// Idler occupancy entering the amplifier, when one is active.
    pub idler_at_amp: Option<Occupancy<T>>,
    pub output: Occupancy<T>,
    pub total_gain: GainLinear<T>,
    /// `output / total_gain - input`; negative when the input is hotter
    /// than everything the chain adds.
    pub added_input_referred: T,
}

impl<T: Scalar> ExactPropagation<T> {
    pub fn added_temperature(&self) -> T {
        self.added_input_referred * self.frequency.quantum_temperature()
    }
}

/// Propagates `n_in_signal` through every stage with the amplifier pumped.
pub fn propagate_exact<T: Scalar>(
    cfg: &ChainConfig<T>,
    n_in_signal: Occupancy<T>,
) -> Result<Vec<ExactPropagation<T>>> {
    propagate(cfg, n_in_signal, true)
}

/// Same as [`propagate_exact`] with the amplifier unpumped (passive, gain 1).
pub fn propagate_exact_off<T: Scalar>(
    cfg: &ChainConfig<T>,
    n_in_signal: Occupancy<T>,
) -> Result<Vec<ExactPropagation<T>>> {
    propagate(cfg, n_in_signal, false)
}

fn propagate<T: Scalar>(
    cfg: &ChainConfig<T>,
    n_in: Occupancy<T>,
    amp_on: bool,
) -> Result<Vec<ExactPropagation<T>>> {
    cfg.grid
        .iter()
        .map(|&f| {
            let points = cfg.evaluate(f)?;
            let vacuum = T::lit(VACUUM_QUANTA);
            let mut signal = n_in.quanta();
            let mut idler = vacuum;
            let mut idler_at_amp = None;
            let mut total_gain = T::one();
            let mut states = Vec::with_capacity(points.len());
            for (stage, point) in cfg.stages.iter().zip(&points) {
                match *point {
                    StagePoint::Loss {
                        eta,
                        n_bath,
                        eta_idler,
                        n_bath_idler,
                    } => {
                        signal = eta * signal + (T::one() - eta) * n_bath;
                        idler = eta_idler * idler + (T::one() - eta_idler) * n_bath_idler;
                    }
                    StagePoint::Amp {
                        gain,
                        excess_signal,
                        excess_idler,
                    } => {
                        if amp_on {
                            idler_at_amp = Some(Occupancy(idler));
                            signal = paramp_output(
                                Occupancy(signal + excess_signal),
                                Occupancy(idler + excess_idler),
                                GainLinear(gain),
                            )?
                            .quanta();
                        }
                    }
                    StagePoint::Follower { gain, added } => {
                        signal = gain * (signal + added);
                    }
                }
                total_gain = total_gain * point.signal_gain(amp_on);
                states.push(StageState {
                    label: stage.label.clone(),
                    signal: Occupancy(signal),
                });
            }
            Ok(ExactPropagation {
                frequency: f,
                input: n_in,
                stages: states,
                idler_at_amp,
                output: Occupancy(signal),
                total_gain: GainLinear(total_gain),
                added_input_referred: signal / total_gain - n_in.quanta(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Closed-form attribution

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainState {
    /// Amplifier pumped; high-gain closed form.
    On,
    /// Amplifier unpumped and treated as a passive unity-gain element.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageNoise<T = f64> {
    pub label: String,
    pub role: StageRole,
    pub efficiency: Option<T>,
    /// Noise at the stage's own reference plane.
    pub intrinsic: Occupancy<T>,
    /// Noise divided by all gain and efficiency in front of the stage.
    pub input_referred: Occupancy<T>,
    pub intrinsic_k: Temperature<T>,
    pub input_referred_k: Temperature<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyNoise<T = f64> {
    pub frequency: Frequency<T>,
    pub n_sigma: Occupancy<T>,
    pub t_sigma: Temperature<T>,
    pub total_gain: GainLinear<T>,
    /// False when the amplifier gain is below [`HIGH_GAIN_THRESHOLD`].
    pub high_gain_valid: bool,
    pub stages: Vec<StageNoise<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainNoiseReport<T = f64> {
    pub state: ChainState,
    pub band: BandWindow<T>,
    pub points: Vec<FrequencyNoise<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageBandAverage<T = f64> {
    pub label: String,
    pub role: StageRole,
    pub efficiency: Option<T>,
    pub insertion_loss_db: Option<T>,
    pub intrinsic_k: T,
    pub input_referred_k: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandAverage<T = f64> {
    pub lo_hz: T,
    pub hi_hz: T,
    pub points_used: usize,
    pub n_sigma: T,
    pub t_sigma: T,
    pub all_high_gain_valid: bool,
    pub stages: Vec<StageBandAverage<T>>,
}

impl<T: Scalar> ChainNoiseReport<T> {
    pub fn n_sigma(&self) -> Vec<Occupancy<T>> {
        self.points.iter().map(|p| p.n_sigma).collect()
    }

    pub fn t_sigma(&self) -> Vec<Temperature<T>> {
        self.points.iter().map(|p| p.t_sigma).collect()
    }

    /// Arithmetic mean over grid points inside the report's band window.
    pub fn band_average(&self) -> Result<BandAverage<T>> {
        let used: Vec<&FrequencyNoise<T>> = self
            .points
            .iter()
            .filter(|p| self.band.contains(p.frequency))
            .collect();
        if used.is_empty() {
            return Err(Error::InvalidChain(format!(
                "no grid points inside band {}..{} Hz",
                self.band.lo_hz, self.band.hi_hz
            )));
        }
        let n = T::from_usize(used.len()).unwrap();
        let mean = |f: &dyn Fn(&FrequencyNoise<T>) -> T| used.iter().map(|p| f(p)).sum::<T>() / n;
        let stages = (0..used[0].stages.len())
            .map(|j| {
                let first = &used[0].stages[j];
                let efficiency = first
                    .efficiency
                    .map(|_| mean(&|p| p.stages[j].efficiency.unwrap_or(T::one())));
                StageBandAverage {
                    label: first.label.clone(),
                    role: first.role,
                    efficiency,
                    insertion_loss_db: efficiency.map(|e| -T::lit(10.0) * e.log10()),
                    intrinsic_k: mean(&|p| p.stages[j].intrinsic_k.kelvin()),
                    input_referred_k: mean(&|p| p.stages[j].input_referred_k.kelvin()),
                }
            })
            .collect();
        Ok(BandAverage {
            lo_hz: self.band.lo_hz,
            hi_hz: self.band.hi_hz,
            points_used: used.len(),
            n_sigma: mean(&|p| p.n_sigma.quanta()),
            t_sigma: mean(&|p| p.t_sigma.kelvin()),
            all_high_gain_valid: used.iter().all(|p| p.high_gain_valid),
            stages,
        })
    }
}

/// Per-stage `(intrinsic, input_referred)` occupancies at one frequency.
pub(crate) struct Attribution<T> {
    pub terms: Vec<(T, T)>,
    pub gain_before: Vec<T>,
    pub total_gain: T,
    pub amp_gain: Option<T>,
}

impl<T: Scalar> Attribution<T> {
    pub fn n_sigma(&self) -> T {
        self.terms.iter().map(|t| t.1).sum()
    }
}

pub(crate) fn attribute<T: Scalar>(points: &[StagePoint<T>], state: ChainState) -> Attribution<T> {
    let amp_on = state == ChainState::On;
    let amp = points
        .iter()
        .position(|p| matches!(p, StagePoint::Amp { .. }))
        .filter(|_| amp_on);

    let mut gain_before = Vec::with_capacity(points.len());
    let mut g = T::one();
    for p in points {
        gain_before.push(g);
        g = g * p.signal_gain(amp_on);
    }
    let total_gain = g;

    // Idler bookkeeping for stages in front of an active amplifier: the
    // idler leaving stage j is attenuated by every later idler efficiency.
    let (idler_tail, pre_signal_gain) = match amp {
        Some(p) => {
            let mut tail = vec![T::one(); p];
            for j in (0..p.saturating_sub(1)).rev() {
                let StagePoint::Loss { eta_idler, .. } = points[j + 1] else {
                    unreachable!("only loss stages precede the amplifier")
                };
                tail[j] = tail[j + 1] * eta_idler;
            }
            (tail, gain_before[p])
        }
        None => (Vec::new(), T::one()),
    };

    let mut terms: Vec<(T, T)> = points
        .iter()
        .enumerate()
        .map(|(j, point)| {
            let intrinsic = match *point {
                StagePoint::Loss {
                    eta,
                    n_bath,
                    eta_idler,
                    n_bath_idler,
                } => {
                    let signal = (T::one() - eta) / eta * n_bath;
                    let idler = match amp {
                        Some(p) if j < p => {
                            (T::one() - eta_idler) * n_bath_idler * idler_tail[j] * gain_before[j]
                                / pre_signal_gain
                        }
                        _ => T::zero(),
                    };
                    signal + idler
                }
                StagePoint::Amp {
                    excess_signal,
                    excess_idler,
                    ..
                } => {
                    if amp_on {
                        excess_signal + excess_idler
                    } else {
                        T::zero()
                    }
                }
                StagePoint::Follower { added, .. } => added,
            };
            (intrinsic, intrinsic / gain_before[j])
        })
        .collect();

    if let Some(p) = amp {
        // Vacuum entering the idler port, referred through the idler
        // efficiencies back to the signal input.
        let idler_transmission = if p == 0 {
            T::one()
        } else {
            let StagePoint::Loss { eta_idler, .. } = points[0] else {
                unreachable!()
            };
            idler_tail[0] * eta_idler
        };
        let vacuum = T::lit(VACUUM_QUANTA) * idler_transmission / pre_signal_gain;
        terms[0].0 = terms[0].0 + vacuum;
        terms[0].1 = terms[0].1 + vacuum;
    }

    let amp_gain = amp.map(|p| match points[p] {
        StagePoint::Amp { gain, .. } => gain,
        _ => unreachable!(),
    });
    Attribution {
        terms,
        gain_before,
        total_gain,
        amp_gain,
    }
}

fn report<T: Scalar>(cfg: &ChainConfig<T>, state: ChainState) -> Result<ChainNoiseReport<T>> {
    let points = cfg
        .grid
        .iter()
        .map(|&f| {
            let pts = cfg.evaluate(f)?;
            let attr = attribute(&pts, state);
            let stages = cfg
                .stages
                .iter()
                .zip(&pts)
                .zip(&attr.terms)
                .map(|((stage, point), &(intrinsic, referred))| StageNoise {
                    label: stage.label.clone(),
                    role: stage.role(),
                    efficiency: match *point {
                        StagePoint::Loss { eta, .. } => Some(eta),
                        _ => None,
                    },
                    intrinsic: Occupancy::saturating(intrinsic),
                    input_referred: Occupancy::saturating(referred),
                    intrinsic_k: quanta_to_k(intrinsic, f),
                    input_referred_k: quanta_to_k(referred, f),
                })
                .collect();
            let n_sigma = attr.n_sigma();
            Ok(FrequencyNoise {
                frequency: f,
                n_sigma: Occupancy(n_sigma),
                t_sigma: quanta_to_k(n_sigma, f),
                total_gain: GainLinear(attr.total_gain),
                high_gain_valid: attr
                    .amp_gain
                    .is_none_or(|g| g >= T::lit(HIGH_GAIN_THRESHOLD)),
                stages,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainNoiseReport {
        state,
        band: cfg.band,
        points,
    })
}

/// Input-referred chain-added noise with the amplifier pumped, in the
/// high-gain closed form, with the per-stage breakdown.
///
/// Points where the amplifier gain is below [`HIGH_GAIN_THRESHOLD`] carry
/// `high_gain_valid = false`; [`propagate_exact`] is authoritative there.
pub fn chain_added_noise<T: Scalar>(cfg: &ChainConfig<T>) -> Result<ChainNoiseReport<T>> {
    if cfg.paramp_index().is_none() {
        return Err(Error::MissingParamAmp);
    }
    report(cfg, ChainState::On)
}

/// Per-stage breakdown of the chain with the amplifier unpumped.
pub fn off_state_report<T: Scalar>(cfg: &ChainConfig<T>) -> Result<ChainNoiseReport<T>> {
    report(cfg, ChainState::Off)
}

/// Chain-added noise with the amplifier acting as a passive unity-gain
/// element: no idler terms and no excess noise.
pub fn chain_added_noise_off<T: Scalar>(cfg: &ChainConfig<T>) -> Result<Vec<Occupancy<T>>> {
    Ok(off_state_report(cfg)?.n_sigma())
}

// ---------------------------------------------------------------------------
// Noise rise

/// Ratio of output noise with the amplifier on versus off, given vacuum at
/// the chain input: `r = G·(N_Σ + ½)/(N_Σ' + ½)`.
pub fn noise_rise<T: Scalar>(
    n_sigma: Occupancy<T>,
    n_sigma_off: Occupancy<T>,
    g: GainLinear<T>,
) -> Result<T> {
    check_rise_gain(g)?;
    let half = T::lit(VACUUM_QUANTA);
    Ok(g.ratio() * (n_sigma.quanta() + half) / (n_sigma_off.quanta() + half))
}

/// Inverse of [`noise_rise`]: `N_Σ = r·(N_Σ' + ½)/G - ½`.
pub fn noise_from_rise<T: Scalar>(
    r: T,
    g: GainLinear<T>,
    n_sigma_off: Occupancy<T>,
) -> Result<Occupancy<T>> {
    check_rise_gain(g)?;
    if !(r > T::zero()) || !r.is_finite() {
        return Err(Error::OutOfRange {
            what: "noise rise",
            value: r.to_f64_lossy(),
            constraint: "must be finite and > 0",
        });
    }
    let half = T::lit(VACUUM_QUANTA);
    let n = r * (n_sigma_off.quanta() + half) / g.ratio() - half;
    if n < T::zero() {
        return Err(Error::OutOfRange {
            what: "noise rise",
            value: r.to_f64_lossy(),
            constraint: "implies a chain-added noise below zero",
        });
    }
    Ok(Occupancy(n))
}

fn check_rise_gain<T: Scalar>(g: GainLinear<T>) -> Result<()> {
    if !(g.ratio() >= T::one()) {
        return Err(Error::OutOfRange {
            what: "amplifier gain",
            value: g.ratio().to_f64_lossy(),
            constraint: "must be >= 1",
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gain sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainSweepPoint<T = f64> {
    pub gain: GainLinear<T>,
    /// Band-averaged chain-added noise temperature.
    pub t_sigma: Temperature<T>,
    pub high_gain_valid: bool,
}

/// Band-averaged `T_Σ` with the amplifier gain set flat to each value.
pub fn gain_sweep<T: Scalar>(
    cfg: &ChainConfig<T>,
    gains: &[GainLinear<T>],
) -> Result<Vec<GainSweepPoint<T>>> {
    if gains.windows(2).any(|w| !(w[1].ratio() > w[0].ratio())) {
        return Err(Error::InvalidChain(
            "sweep gains must be strictly increasing".into(),
        ));
    }
    gains
        .iter()
        .map(|&g| {
            let avg = chain_added_noise(&cfg.with_paramp_gain(Profile::constant(g.ratio()))?)?
                .band_average()?;
            Ok(GainSweepPoint {
                gain: g,
                t_sigma: Temperature(avg.t_sigma),
                high_gain_valid: avg.all_high_gain_valid,
            })
        })
        .collect()
}

/// Infinite-gain limit of the band-averaged `T_Σ`: only the stages up to
/// and including the amplifier contribute.
pub fn gain_sweep_asymptote<T: Scalar>(cfg: &ChainConfig<T>) -> Result<Temperature<T>> {
    let p = cfg.paramp_index().ok_or(Error::MissingParamAmp)?;
    let avg = chain_added_noise(cfg)?.band_average()?;
    Ok(Temperature(
        avg.stages[..=p].iter().map(|s| s.input_referred_k).sum(),
    ))
}
