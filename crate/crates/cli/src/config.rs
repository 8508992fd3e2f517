//! JSON chain-configuration files.

use serde::Deserialize;

use cryochain::chainmodel::{linear_grid, IdlerMode};
use cryochain::{BandWindow, ChainConfig, Frequency, Profile, Stage, Temperature};

use crate::CliError;

/// A scalar or a list of `[frequency_hz, value]` pairs.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    Scalar(f64),
    Pairs(Vec<(f64, f64)>),
}

impl ValueSpec {
    fn profile(&self, map: impl Fn(f64) -> f64) -> cryochain::Result<Profile> {
        match self {
            ValueSpec::Scalar(v) => Ok(Profile::constant(map(*v))),
            ValueSpec::Pairs(p) => Profile::table(p.iter().map(|&(f, v)| (f, map(v))).collect()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageSpec {
    Loss {
        label: String,
        stage_temp_k: f64,
        eta: ValueSpec,
        #[serde(default)]
        idler_eta: Option<ValueSpec>,
    },
    Paramp {
        label: String,
        #[serde(default)]
        stage_temp_k: Option<f64>,
        gain_db: ValueSpec,
        #[serde(default)]
        excess_k: Option<ValueSpec>,
    },
    Follower {
        label: String,
        #[serde(default)]
        stage_temp_k: Option<f64>,
        gain_db: ValueSpec,
        added_noise_k: ValueSpec,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfigFile {
    pub frequency_grid: GridSpec,
    pub stages: Vec<StageSpec>,
    #[serde(default)]
    pub idler_mode: Option<IdlerModeSpec>,
    #[serde(default)]
    pub pump_freq_hz: Option<f64>,
    #[serde(default)]
    pub band_avg: Option<BandSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdlerModeSpec {
    SameAsSignal,
    Explicit,
    IdlerFrequency,
}

impl From<IdlerModeSpec> for IdlerMode {
    fn from(m: IdlerModeSpec) -> Self {
        match m {
            IdlerModeSpec::SameAsSignal => IdlerMode::SameAsSignal,
            IdlerModeSpec::Explicit => IdlerMode::Explicit,
            IdlerModeSpec::IdlerFrequency => IdlerMode::IdlerFrequency,
        }
    }
}

/// Amplifier stage temperatures are informational; they only need to be valid.
fn check_temp(t: Option<f64>) -> cryochain::Result<()> {
    t.map_or(Ok(()), |t| Temperature::new(t).map(|_| ()))
}

fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ChainConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("chain config: {e}")))
    }

    /// Builds the validated chain; `band` overrides the file's `band_avg`.
    pub fn build(&self, band: Option<(f64, f64)>) -> Result<ChainConfig, CliError> {
        self.build_inner(band)
            .map_err(|e| CliError::Input(format!("chain config: {e}")))
    }

    fn build_inner(&self, band: Option<(f64, f64)>) -> cryochain::Result<ChainConfig> {
        let g = &self.frequency_grid;
        let grid = linear_grid(g.start_hz, g.stop_hz, g.points)?;
        let has_paramp = self
            .stages
            .iter()
            .any(|s| matches!(s, StageSpec::Paramp { .. }));
        let pump = match (self.pump_freq_hz, has_paramp) {
            (Some(p), _) => Some(Frequency::new(p)?),
            (None, true) => {
                return Err(cryochain::Error::InvalidChain(
                    "pump_freq_hz is required when a paramp stage is present".into(),
                ))
            }
            (None, false) => None,
        };
        let stages = self
            .stages
            .iter()
            .map(|s| {
                Ok(match s {
                    StageSpec::Loss {
                        label,
                        stage_temp_k,
                        eta,
                        idler_eta,
                    } => {
                        let mut st = Stage::loss(
                            label.clone(),
                            eta.profile(|v| v)?,
                            Temperature::new(*stage_temp_k)?,
                        );
                        if let Some(ie) = idler_eta {
                            st = st.with_idler_eta(ie.profile(|v| v)?);
                        }
                        st
                    }
                    StageSpec::Paramp {
                        label,
                        stage_temp_k,
                        gain_db,
                        excess_k,
                    } => {
                        check_temp(*stage_temp_k)?;
                        Stage::paramp(
                            label.clone(),
                            gain_db.profile(db_to_ratio)?,
                            excess_k
                                .as_ref()
                                .map_or(Ok(Profile::constant(0.0)), |e| e.profile(|v| v))?,
                            pump.expect("checked above"),
                        )
                    }
                    StageSpec::Follower {
                        label,
                        stage_temp_k,
                        gain_db,
                        added_noise_k,
                    } => {
                        check_temp(*stage_temp_k)?;
                        Stage::follower(
                            label.clone(),
                            gain_db.profile(db_to_ratio)?,
                            added_noise_k.profile(|v| v)?,
                        )
                    }
                })
            })
            .collect::<cryochain::Result<Vec<_>>>()?;
        let mode = self.idler_mode.map_or(IdlerMode::SameAsSignal, Into::into);
        let mut cfg = ChainConfig::new(stages, grid, mode)?;
        let band = band.or(self.band_avg.as_ref().map(|b| (b.lo_hz, b.hi_hz)));
        if let Some((lo, hi)) = band {
            cfg = cfg.with_band(BandWindow::new(lo, hi)?);
        }
        Ok(cfg)
    }
}
