//! `cryochain` command-line tool.

mod commands;
mod config;
mod output;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent input.
    #[error("{0}")]
    Input(String),
    /// Valid input on which a computation failed.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<units::UnitError> for CliError {
    fn from(e: units::UnitError) -> Self {
        CliError::Input(e.0)
    }
}

/// Maps a library error raised while computing.
pub fn numerical(e: cryochain::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Maps a library error raised while validating inputs.
pub fn input(e: cryochain::Error) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "cryochain",
    version,
    about = "Noise budgets and calibration fits for cryogenic amplification chains"
)]
pub struct Cli {
    /// Chain configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Seed for synthetic data and Monte Carlo.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Band-average window as lo:hi, e.g. 3.5GHz:5.5GHz.
    #[arg(long, global = true)]
    pub band: Option<String>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward-model the chain-added noise and its per-stage breakdown.
    Simulate {
        /// Model the amplifier unpumped (unity gain, no idler).
        #[arg(long)]
        off: bool,
    },
    /// Two-stage fit of a shot-noise curve against bias voltage.
    FitShot {
        #[arg(long)]
        data: PathBuf,
        /// Expected analysis frequency; must match the curve file.
        #[arg(long)]
        frequency: Option<String>,
    },
    /// Linear fit of a Johnson-noise curve against source temperature.
    FitJohnson {
        #[arg(long)]
        data: PathBuf,
    },
    /// Chain-added noise from measured noise rises.
    NoiseRise {
        /// CSV with columns frequency_hz,rise.
        #[arg(long)]
        rise: PathBuf,
        /// Amplifier gain: a value such as 18dB, or a CSV with frequency_hz,gain_db.
        #[arg(long)]
        gain: String,
        /// CSV with columns frequency_hz,n_sigma_off.
        #[arg(long)]
        n_sigma_off: PathBuf,
    },
    /// Infer follower and excess noise from measurements and tabulate the chain.
    Budget {
        /// CSV with columns frequency_hz,n_sigma_off,t_sigma_k on the config grid.
        #[arg(long)]
        measurements: PathBuf,
        /// Chain gain measured with the packaged junction (linear).
        #[arg(long, requires = "gain_vts")]
        gain_sntj: Option<f64>,
        /// Chain gain measured with the Johnson source (linear).
        #[arg(long, requires = "gain_sntj")]
        gain_vts: Option<f64>,
        /// Monte Carlo samples; omit to skip the uncertainty estimate.
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Output-power calibration uncertainty, e.g. 0.3dB.
        #[arg(long, default_value = "0dB")]
        prior_output: String,
        /// Amplifier gain uncertainty, e.g. 0.1dB.
        #[arg(long, default_value = "0dB")]
        prior_gain: String,
        /// Relative source-resistance uncertainty, e.g. 0.073.
        #[arg(long, default_value_t = 0.0)]
        prior_resistance: f64,
        /// Absolute efficiency uncertainty, e.g. 0.02.
        #[arg(long, default_value_t = 0.0)]
        prior_efficiency: f64,
    },
    /// Pump-line dissipation per temperature stage.
    PumpPower {
        /// JSON pump path: {"delivered_dbm": -30, "elements": [...]}.
        #[arg(long)]
        path: PathBuf,
        /// Power delivered at the amplifier, overriding the file, e.g. -30dBm.
        #[arg(long, allow_hyphen_values = true)]
        delivered: Option<String>,
        /// Amplifier dc bias voltage, e.g. 80uV; reported with --dc-current.
        #[arg(long, requires = "dc_current", allow_hyphen_values = true)]
        dc_voltage: Option<String>,
        /// Amplifier dc bias current, e.g. 0.7mA.
        #[arg(long, requires = "dc_voltage", allow_hyphen_values = true)]
        dc_current: Option<String>,
    },
    /// Generate a synthetic calibration curve.
    Synth {
        #[arg(long, value_enum)]
        source: SourceKind,
        #[arg(long)]
        frequency: String,
        /// Chain gain, e.g. 60dB.
        #[arg(long)]
        gain: String,
        /// Chain-added noise in quanta.
        #[arg(long)]
        n_sigma_off: f64,
        /// Relative Gaussian noise on each point.
        #[arg(long, default_value_t = 0.0)]
        rel_noise: f64,
        /// Junction temperature (sntj).
        #[arg(long, default_value = "40mK")]
        temperature: String,
        /// Junction resistance (sntj).
        #[arg(long, default_value = "48.2ohm")]
        resistance: String,
        /// Bias offset (sntj).
        #[arg(long, default_value = "0V", allow_hyphen_values = true)]
        v_offset: String,
        /// Largest bias magnitude (sntj); the sweep is symmetric.
        #[arg(long, default_value = "250uV")]
        v_max: String,
        #[arg(long, default_value_t = 501)]
        points: usize,
        /// Comma-separated stage temperatures (vts), e.g. 0.1K,1K,4K.
        #[arg(long)]
        temperatures: Option<String>,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "synth.csv")]
        output: String,
    },
    /// Band-averaged chain-added noise against amplifier gain.
    SweepGain {
        /// start:stop:points or a comma list, e.g. 0dB:25dB:26.
        #[arg(long)]
        gains: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceKind {
    Sntj,
    Vts,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are input errors; help and version are not errors.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
