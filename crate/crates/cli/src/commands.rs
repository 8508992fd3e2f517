use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cryochain::budget::{
    budget_report, dc_power, mc_uncertainty, pump_dissipation, McPriors, PumpElement,
};
use cryochain::chainmodel::{
    chain_added_noise, gain_sweep, gain_sweep_asymptote, noise_from_rise, off_state_report,
    ChainState,
};
use cryochain::fitter::{
    fit_johnson_curve, fit_shot, JohnsonFitResult, ShotFitOptions, ShotFitResult,
};
use cryochain::sources::{
    synthesize_curve, AxisKind, NoiseCurve, NoiseSource, SntjParams, VtsParams,
};
use cryochain::{ChainConfig, Frequency, GainDb, GainLinear, Occupancy, PowerDbm, Temperature};

use crate::config::ChainConfigFile;
use crate::output::{num, Outputs};
use crate::units::{self, Dimension};
use crate::{input, numerical, Cli, CliError, Command, Format, SourceKind};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut out = Outputs::default();
    let summary = match &cli.command {
        Command::Simulate { off } => simulate(cli, *off, &mut out)?,
        Command::FitShot { data, frequency } => {
            fit_shot_cmd(cli, data, frequency.as_deref(), &mut out)?
        }
        Command::FitJohnson { data } => fit_johnson_cmd(cli, data, &mut out)?,
        Command::NoiseRise {
            rise,
            gain,
            n_sigma_off,
        } => noise_rise_cmd(cli, rise, gain, n_sigma_off, &mut out)?,
        Command::Budget {
            measurements,
            gain_sntj,
            gain_vts,
            mc_samples,
            prior_output,
            prior_gain,
            prior_resistance,
            prior_efficiency,
        } => {
            let priors = McPriors {
                output_power_db: units::parse(prior_output, Dimension::GainDb)?,
                paramp_gain_db: units::parse(prior_gain, Dimension::GainDb)?,
                sntj_resistance_rel: *prior_resistance,
                efficiency_abs: *prior_efficiency,
            };
            let gains = match (gain_sntj, gain_vts) {
                (Some(s), Some(v)) => Some((
                    GainLinear::new(*s).map_err(input)?,
                    GainLinear::new(*v).map_err(input)?,
                )),
                _ => None,
            };
            budget_cmd(cli, measurements, gains, *mc_samples, priors, &mut out)?
        }
        Command::PumpPower {
            path,
            delivered,
            dc_voltage,
            dc_current,
        } => {
            let dc = match (dc_voltage, dc_current) {
                (Some(v), Some(i)) => Some((
                    units::parse(v, Dimension::Voltage)?,
                    units::parse(i, Dimension::Current)?,
                )),
                _ => None,
            };
            pump_cmd(cli, path, delivered.as_deref(), dc, &mut out)?
        }
        Command::Synth { .. } => synth_cmd(cli, &mut out)?,
        Command::SweepGain { gains } => sweep_cmd(cli, gains, &mut out)?,
    };
    let written = out.commit(&cli.out_dir)?;
    for line in summary {
        println!("{line}");
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared helpers

enum Cell {
    Num(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => num(*v),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v)
                .map_or(serde_json::Value::Null, serde_json::Value::Number),
            Cell::Bool(b) => serde_json::Value::Bool(*b),
            Cell::Text(s) => serde_json::Value::String(s.clone()),
        }
    }
}

/// Writes `stem.csv` or `stem.json` (an array of row objects).
fn table(
    out: &mut Outputs,
    format: Format,
    stem: &str,
    header: &[String],
    rows: &[Vec<Cell>],
) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            out.csv(
                &format!("{stem}.csv"),
                &h,
                rows.iter()
                    .map(|r| r.iter().map(Cell::csv).collect::<Vec<_>>()),
            )
        }
        Format::Json => {
            let arr: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|r| {
                    header
                        .iter()
                        .cloned()
                        .zip(r.iter().map(Cell::json))
                        .collect()
                })
                .collect();
            out.json(&format!("{stem}.json"), &arr)
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_chain(cli: &Cli) -> Result<ChainConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Input("this command needs --config".into()))?;
    let band = cli
        .band
        .as_deref()
        .map(|b| units::parse_range(b, Dimension::Frequency))
        .transpose()?;
    ChainConfigFile::parse(&read_text(path)?)?.build(band)
}

fn load_curve(path: &Path) -> Result<NoiseCurve, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    NoiseCurve::read_csv(file).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Reads a numeric CSV whose header must be exactly `columns`.
fn read_columns(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let text = read_text(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != columns {
        return Err(bad(format!(
            "expected columns {columns:?}, found {header:?}"
        )));
    }
    let mut cols = vec![Vec::new(); columns.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| bad(format!("row {}: '{cell}' is not a finite number", i + 2)))?;
            cols[j].push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(cols)
}

fn same_frequencies(a: &[f64], b: &[f64], what: &str) -> Result<(), CliError> {
    let ok = a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()));
    if ok {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{what}: frequency columns do not match"
        )))
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Serialize)]
struct BandOutput<T: Serialize> {
    state: ChainState,
    #[serde(flatten)]
    average: T,
}

fn simulate(cli: &Cli, off: bool, out: &mut Outputs) -> Result<Vec<String>, CliError> {
    let cfg = load_chain(cli)?;
    let report = if off || cfg.paramp_index().is_none() {
        off_state_report(&cfg)
    } else {
        chain_added_noise(&cfg)
    }
    .map_err(numerical)?;
    let avg = report.band_average().map_err(numerical)?;

    let mut header = strings(&[
        "frequency_hz",
        "n_sigma",
        "t_sigma_k",
        "total_gain_db",
        "high_gain_valid",
    ]);
    for s in cfg.stages() {
        header.push(format!("{}_intrinsic_k", s.label));
        header.push(format!("{}_input_referred_k", s.label));
    }
    let rows: Vec<Vec<Cell>> = report
        .points
        .iter()
        .map(|p| {
            let mut r = vec![
                Cell::Num(p.frequency.hertz()),
                Cell::Num(p.n_sigma.quanta()),
                Cell::Num(p.t_sigma.kelvin()),
                Cell::Num(p.total_gain.to_db().db()),
                Cell::Bool(p.high_gain_valid),
            ];
            for s in &p.stages {
                r.push(Cell::Num(s.intrinsic_k.kelvin()));
                r.push(Cell::Num(s.input_referred_k.kelvin()));
            }
            r
        })
        .collect();
    table(out, cli.format, "simulate", &header, &rows)?;
    out.json(
        "simulate_band.json",
        &BandOutput {
            state: report.state,
            average: &avg,
        },
    )?;

    let mut lines = vec![format!(
        "band {:.4}-{:.4} GHz ({} points): T_sigma = {:.4} K ({:.4} quanta)",
        avg.lo_hz / 1e9,
        avg.hi_hz / 1e9,
        avg.points_used,
        avg.t_sigma,
        avg.n_sigma
    )];
    if !avg.all_high_gain_valid {
        lines.push(
            "warning: amplifier gain below the high-gain threshold at some frequencies".into(),
        );
    }
    Ok(lines)
}

// ---------------------------------------------------------------------------
// fits

#[derive(Serialize)]
struct ShotFitOutput<'a> {
    frequency_hz: f64,
    points: usize,
    chain_gain_db: f64,
    t_sigma_off_k: f64,
    stage1_window_v: [f64; 2],
    #[serde(flatten)]
    fit: &'a ShotFitResult,
}

fn check_frequency(curve: &NoiseCurve, expected: Option<&str>) -> Result<Frequency, CliError> {
    if let Some(text) = expected {
        let f = units::parse(text, Dimension::Frequency)?;
        let c = curve.frequency.hertz();
        if (f - c).abs() > 1e-9 * c {
            return Err(CliError::Input(format!(
                "--frequency {f} Hz does not match the curve's {c} Hz"
            )));
        }
    }
    Ok(curve.frequency)
}

fn fit_shot_cmd(
    cli: &Cli,
    data: &Path,
    frequency: Option<&str>,
    out: &mut Outputs,
) -> Result<Vec<String>, CliError> {
    let curve = load_curve(data)?;
    if curve.kind != AxisKind::Volts {
        return Err(CliError::Input(format!(
            "{}: shot-noise fit needs x_kind = volts",
            data.display()
        )));
    }
    let f = check_frequency(&curve, frequency)?;
    let fit = fit_shot(&curve, f, &ShotFitOptions::default()).map_err(numerical)?;
    let s1 = &fit.stage1;
    out.json(
        "fit_shot.json",
        &ShotFitOutput {
            frequency_hz: f.hertz(),
            points: curve.len(),
            chain_gain_db: fit.chain_gain.to_db().db(),
            t_sigma_off_k: fit.n_sigma_off.quanta() * f.quantum_temperature(),
            stage1_window_v: [
                s1.positive.v_abs_min.min(s1.negative.v_abs_min),
                s1.positive.v_abs_max.max(s1.negative.v_abs_max),
            ],
            fit: &fit,
        },
    )?;
    let model = fit.predict(&curve.x, f);
    let rows: Vec<Vec<Cell>> = curve
        .x
        .iter()
        .zip(&curve.y)
        .zip(&model)
        .map(|((x, y), m)| {
            vec![
                Cell::Num(*x),
                Cell::Num(*y),
                Cell::Num(*m),
                Cell::Num(y - m),
            ]
        })
        .collect();
    table(
        out,
        cli.format,
        "fit_shot_residuals",
        &strings(&["x_value", "y_quanta", "model", "residual"]),
        &rows,
    )?;
    let mut lines = vec![format!(
        "G_c = {:.6e} ({:.3} dB), N_sigma' = {:.4} quanta ({:.4} K), T = {:.4} K, V_off = {:.4e} V",
        fit.chain_gain.ratio(),
        fit.chain_gain.to_db().db(),
        fit.n_sigma_off.quanta(),
        fit.n_sigma_off.quanta() * f.quantum_temperature(),
        fit.source_temp.kelvin(),
        fit.v_offset
    )];
    lines.extend(fit.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(lines)
}

#[derive(Serialize)]
struct JohnsonOutput<'a> {
    frequency_hz: f64,
    chain_gain_db: f64,
    t_sigma_k: f64,
    #[serde(flatten)]
    fit: &'a JohnsonFitResult,
}

fn fit_johnson_cmd(cli: &Cli, data: &Path, out: &mut Outputs) -> Result<Vec<String>, CliError> {
    let curve = load_curve(data)?;
    if curve.kind != AxisKind::Kelvin {
        return Err(CliError::Input(format!(
            "{}: Johnson fit needs x_kind = kelvin",
            data.display()
        )));
    }
    let f = curve.frequency;
    let fit = fit_johnson_curve(&curve, f).map_err(numerical)?;
    out.json(
        "fit_johnson.json",
        &JohnsonOutput {
            frequency_hz: f.hertz(),
            chain_gain_db: fit.chain_gain.to_db().db(),
            t_sigma_k: fit.n_sigma.quanta() * f.quantum_temperature(),
            fit: &fit,
        },
    )?;
    let g = fit.chain_gain.ratio();
    let rows = curve
        .x
        .iter()
        .zip(&curve.y)
        .map(|(&t, &y)| {
            let n = cryochain::sources::johnson_occupancy(Temperature::new(t).map_err(input)?, f);
            let m = g * (n.quanta() + fit.n_sigma.quanta());
            Ok(vec![
                Cell::Num(t),
                Cell::Num(y),
                Cell::Num(m),
                Cell::Num(y - m),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    table(
        out,
        cli.format,
        "fit_johnson_residuals",
        &strings(&["x_value", "y_quanta", "model", "residual"]),
        &rows,
    )?;
    Ok(vec![format!(
        "G_c2 = {:.6e} ({:.3} dB), N_sigma2 = {:.4} quanta ({:.4} K)",
        g,
        fit.chain_gain.to_db().db(),
        fit.n_sigma.quanta(),
        fit.n_sigma.quanta() * f.quantum_temperature()
    )])
}

// ---------------------------------------------------------------------------
// noise-rise

fn noise_rise_cmd(
    cli: &Cli,
    rise: &Path,
    gain: &str,
    n_off: &Path,
    out: &mut Outputs,
) -> Result<Vec<String>, CliError> {
    let r = read_columns(rise, &["frequency_hz", "rise"])?;
    let n = read_columns(n_off, &["frequency_hz", "n_sigma_off"])?;
    same_frequencies(&r[0], &n[0], "rise and n_sigma_off files")?;
    let gains_db = match units::parse(gain, Dimension::GainDb) {
        Ok(db) => vec![db; r[0].len()],
        Err(_) => {
            let g = read_columns(Path::new(gain), &["frequency_hz", "gain_db"])?;
            same_frequencies(&r[0], &g[0], "rise and gain files")?;
            g[1].clone()
        }
    };
    let mut rows = Vec::with_capacity(r[0].len());
    for i in 0..r[0].len() {
        let f = Frequency::new(r[0][i]).map_err(input)?;
        let g = GainDb::new(gains_db[i]).map_err(input)?.to_linear();
        let off = Occupancy::new(n[1][i]).map_err(input)?;
        let ns = noise_from_rise(r[1][i], g, off).map_err(numerical)?;
        rows.push(vec![
            Cell::Num(f.hertz()),
            Cell::Num(ns.quanta()),
            Cell::Num(ns.quanta() * f.quantum_temperature()),
        ]);
    }
    table(
        out,
        cli.format,
        "noise_rise",
        &strings(&["frequency_hz", "n_sigma", "t_sigma_k"]),
        &rows,
    )?;
    Ok(vec![format!("{} frequencies converted", rows.len())])
}

// ---------------------------------------------------------------------------
// budget

fn budget_cmd(
    cli: &Cli,
    measurements: &Path,
    gains: Option<(GainLinear, GainLinear)>,
    mc_samples: Option<usize>,
    priors: McPriors,
    out: &mut Outputs,
) -> Result<Vec<String>, CliError> {
    let cfg = load_chain(cli)?;
    let m = read_columns(measurements, &["frequency_hz", "n_sigma_off", "t_sigma_k"])?;
    let grid: Vec<f64> = cfg.grid().iter().map(|f| f.hertz()).collect();
    same_frequencies(&grid, &m[0], "measurements vs. config grid")?;
    let n_off = m[1]
        .iter()
        .map(|&v| Occupancy::new(v).map_err(input))
        .collect::<Result<Vec<_>, _>>()?;
    let t_sigma = m[2]
        .iter()
        .map(|&v| Temperature::new(v).map_err(input))
        .collect::<Result<Vec<_>, _>>()?;

    let report = budget_report(&cfg, &n_off, &t_sigma, gains).map_err(numerical)?;
    out.json("budget.json", &report)?;
    out.add(
        "budget_table.csv",
        report.table_csv().map_err(numerical)?.into_bytes(),
    );
    let rows: Vec<Vec<Cell>> = report
        .points
        .iter()
        .map(|p| {
            vec![
                Cell::Num(p.frequency_hz),
                Cell::Num(p.t_sigma),
                Cell::Num(p.t_h),
                Cell::Num(p.t_ex),
            ]
        })
        .collect();
    table(
        out,
        cli.format,
        "budget_points",
        &strings(&["frequency_hz", "t_sigma_k", "t_h_k", "t_ex_k"]),
        &rows,
    )?;

    let mut lines = vec![format!(
        "band T_H = {:.4} K, T_ex = {:.4} K, T_sigma = {:.4} K",
        report.t_h_band, report.t_ex_band, report.table.t_sigma
    )];
    if let Some(p) = &report.eta_p {
        lines.push(format!(
            "eta_p = {:.4} ({:.3} dB)",
            p.ratio,
            p.insertion_loss_db()
        ));
        if p.exceeds_unity {
            lines.push("warning: packaging gain ratio exceeds 1".into());
        }
    }
    if let Some(n) = mc_samples {
        let rebuilt = report.apply(&cfg).map_err(numerical)?;
        let mc = mc_uncertainty(&rebuilt, &priors, n, cli.seed).map_err(|e| match e {
            cryochain::Error::OutOfRange { .. } => input(e),
            e => numerical(e),
        })?;
        out.json("budget_mc.json", &mc)?;
        lines.push(format!(
            "Monte Carlo ({n} samples): T_sigma = {:.3} ± {:.3} K, T_H = {:.3} ± {:.3} K, T_ex = {:.3} ± {:.3} K",
            mc.band_t_sigma.mean,
            mc.band_t_sigma.std,
            mc.band_t_h.mean,
            mc.band_t_h.std,
            mc.band_t_ex.mean,
            mc.band_t_ex.std
        ));
    }
    Ok(lines)
}

// ---------------------------------------------------------------------------
// pump-power

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PumpPathFile {
    #[serde(default)]
    delivered_dbm: Option<f64>,
    elements: Vec<PumpElement>,
}

fn pump_cmd(
    cli: &Cli,
    path: &Path,
    delivered: Option<&str>,
    dc: Option<(f64, f64)>,
    out: &mut Outputs,
) -> Result<Vec<String>, CliError> {
    let file: PumpPathFile = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Input(format!("pump path: {e}")))?;
    let dbm = match delivered {
        Some(t) => units::parse(t, Dimension::PowerDbm)?,
        None => file.delivered_dbm.ok_or_else(|| {
            CliError::Input("pump path: give delivered_dbm in the file or --delivered".into())
        })?,
    };
    let budget =
        pump_dissipation(PowerDbm::new(dbm).map_err(input)?, &file.elements).map_err(input)?;
    let rows: Vec<Vec<Cell>> = budget
        .entries
        .iter()
        .map(|e| {
            vec![
                Cell::Text(e.label.clone()),
                Cell::Num(e.stage_temp.kelvin()),
                Cell::Num(e.dissipated.watts()),
            ]
        })
        .collect();
    table(
        out,
        cli.format,
        "pump_power",
        &strings(&["label", "stage_temp_k", "dissipated_w"]),
        &rows,
    )?;
    let totals: Vec<Vec<Cell>> = budget
        .by_stage
        .iter()
        .map(|s| {
            vec![
                Cell::Num(s.stage_temp.kelvin()),
                Cell::Num(s.dissipated.watts()),
            ]
        })
        .collect();
    table(
        out,
        cli.format,
        "pump_power_by_stage",
        &strings(&["stage_temp_k", "dissipated_w"]),
        &totals,
    )?;
    let mut lines = vec![format!(
        "delivered {:.3e} W, generator output {:.3e} W",
        budget.delivered.watts(),
        budget.input.watts()
    )];
    lines.extend(budget.by_stage.iter().map(|s| {
        format!(
            "{:.6e} W dissipated at {} K",
            s.dissipated.watts(),
            s.stage_temp.kelvin()
        )
    }));
    if let Some((v, i)) = dc {
        let p = dc_power(v, i).map_err(input)?;
        out.json(
            "dc_power.json",
            &serde_json::json!({
                "voltage_v": v,
                "current_a": i,
                "power_w": p.power.watts(),
                "resistance_ohm": p.resistance_ohm,
            }),
        )?;
        lines.push(format!(
            "dc bias: {:.4e} W, {:.4e} ohm",
            p.power.watts(),
            p.resistance_ohm
        ));
    }
    Ok(lines)
}

// ---------------------------------------------------------------------------
// synth

fn synth_cmd(cli: &Cli, out: &mut Outputs) -> Result<Vec<String>, CliError> {
    let Command::Synth {
        source,
        frequency,
        gain,
        n_sigma_off,
        rel_noise,
        temperature,
        resistance,
        v_offset,
        v_max,
        points,
        temperatures,
        output,
    } = &cli.command
    else {
        unreachable!()
    };
    let f = Frequency::new(units::parse(frequency, Dimension::Frequency)?).map_err(input)?;
    let g = GainDb::new(units::parse(gain, Dimension::GainDb)?)
        .map_err(input)?
        .to_linear();
    let n = Occupancy::new(*n_sigma_off).map_err(input)?;
    let src = match source {
        SourceKind::Sntj => {
            let t = Temperature::new(units::parse(temperature, Dimension::Temperature)?)
                .map_err(input)?;
            let r = units::parse(resistance, Dimension::Resistance)?;
            let off = units::parse(v_offset, Dimension::Voltage)?;
            let vm = units::parse(v_max, Dimension::Voltage)?;
            NoiseSource::Sntj(SntjParams::sweep(t, r, off, -vm, vm, *points).map_err(input)?)
        }
        SourceKind::Vts => {
            let list = temperatures
                .as_deref()
                .ok_or_else(|| CliError::Input("vts source needs --temperatures".into()))?;
            let temps = units::parse_list(list, Dimension::Temperature)?
                .into_iter()
                .map(|t| Temperature::new(t).map_err(input))
                .collect::<Result<Vec<_>, _>>()?;
            NoiseSource::Vts(VtsParams::new(temps).map_err(input)?)
        }
    };
    if !(rel_noise.is_finite() && *rel_noise >= 0.0) {
        return Err(CliError::Input(format!(
            "--rel-noise {rel_noise} must be >= 0"
        )));
    }
    let curve = synthesize_curve(&src, g, n, f, *rel_noise, cli.seed).map_err(numerical)?;
    let mut bytes = Vec::new();
    curve.write_csv(&mut bytes).map_err(numerical)?;
    out.add(output.clone(), bytes);
    Ok(vec![format!("{} points at {} Hz", curve.len(), f.hertz())])
}

// ---------------------------------------------------------------------------
// sweep-gain

fn sweep_cmd(cli: &Cli, gains: &str, out: &mut Outputs) -> Result<Vec<String>, CliError> {
    let cfg = load_chain(cli)?;
    let gains = units::parse_list(gains, Dimension::GainDb)?
        .into_iter()
        .map(|db| GainDb::new(db).map(|g| g.to_linear()).map_err(input))
        .collect::<Result<Vec<_>, _>>()?;
    let sweep = gain_sweep(&cfg, &gains).map_err(|e| match e {
        cryochain::Error::InvalidChain(_) | cryochain::Error::MissingParamAmp => input(e),
        e => numerical(e),
    })?;
    let asymptote = gain_sweep_asymptote(&cfg).map_err(numerical)?;
    let rows: Vec<Vec<Cell>> = sweep
        .iter()
        .map(|p| {
            vec![
                Cell::Num(p.gain.to_db().db()),
                Cell::Num(p.gain.ratio()),
                Cell::Num(p.t_sigma.kelvin()),
                Cell::Bool(p.high_gain_valid),
            ]
        })
        .collect();
    table(
        out,
        cli.format,
        "sweep_gain",
        &strings(&["gain_db", "gain_linear", "t_sigma_k", "high_gain_valid"]),
        &rows,
    )?;
    Ok(vec![format!(
        "infinite-gain asymptote: T_sigma = {:.4} K",
        asymptote.kelvin()
    )])
}
