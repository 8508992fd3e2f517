//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cryochain::budget::{
    infer_excess_noise, infer_follower_noise, infer_packaging_efficiency, pump_dissipation,
    PumpElement,
};
use cryochain::chainmodel::{
    chain_added_noise, chain_added_noise_off, linear_grid, noise_from_rise, noise_rise,
    propagate_exact, IdlerMode,
};
use cryochain::fitter::{
    asymptotic_mask, fit_johnson_curve, fit_shot, shot_asymptote_quanta, ShotFitOptions, ShotModel,
};
use cryochain::sources::{
    sntj_occupancy, synthesize_curve, AxisKind, NoiseCurve, NoiseSource, SntjParams, VtsParams,
};
use cryochain::{
    BandWindow, ChainConfig, Frequency, GainLinear, Occupancy, PowerDbm, Profile, Stage,
    Temperature,
};

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn k(v: f64) -> Temperature {
    Temperature::new(v).unwrap()
}

fn ghz(v: f64) -> Frequency {
    Frequency::from_ghz(v).unwrap()
}

fn db(v: f64) -> f64 {
    10f64.powf(v / 10.0)
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

struct Chain {
    eta_1c: f64,
    eta_1h: f64,
    eta_2: f64,
    gain: f64,
    t_ex: f64,
    t_h: f64,
    cold_bath: f64,
}

impl Chain {
    fn reference_chain() -> Self {
        Chain {
            eta_1c: 0.80,
            eta_1h: 0.80,
            eta_2: 0.61,
            gain: db(18.0),
            t_ex: 1.9,
            t_h: 13.4,
            cold_bath: 0.03,
        }
    }

    fn build(&self, grid: Vec<Frequency>) -> ChainConfig {
        ChainConfig::new(
            vec![
                Stage::loss("eta_1c", Profile::constant(self.eta_1c), k(self.cold_bath)),
                Stage::loss("eta_1h", Profile::constant(self.eta_1h), k(4.0)),
                Stage::paramp(
                    "ki_twpa",
                    Profile::constant(self.gain),
                    Profile::constant(self.t_ex),
                    ghz(8.979),
                ),
                Stage::loss("eta_2", Profile::constant(self.eta_2), k(4.0)),
                Stage::follower(
                    "hemt",
                    Profile::constant(db(40.0)),
                    Profile::constant(self.t_h),
                ),
            ],
            grid,
            IdlerMode::SameAsSignal,
        )
        .unwrap()
        .with_band(BandWindow::new(3.5e9, 5.5e9).unwrap())
    }
}

fn band_grid() -> Vec<Frequency> {
    linear_grid(3.5e9, 5.5e9, 21).unwrap()
}

fn criterion_1() -> Outcome {
    const INTRINSIC: [f64; 5] = [0.16, 2.1, 1.9, 2.7, 13.4];
    const INPUT_REFERRED: [f64; 5] = [0.16, 2.6, 2.9, 0.07, 0.6];
    let start = Instant::now();
    let cfg = Chain::reference_chain().build(band_grid());
    let avg = chain_added_noise(&cfg).unwrap().band_average().unwrap();
    let elapsed = start.elapsed();

    let intrinsic: Vec<f64> = avg.stages.iter().map(|s| s.intrinsic_k).collect();
    let referred: Vec<f64> = avg.stages.iter().map(|s| s.input_referred_k).collect();
    let within = |got: &[f64], want: &[f64]| {
        got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.15)
    };
    let pass = within(&intrinsic, &INTRINSIC)
        && within(&referred, &INPUT_REFERRED)
        && (avg.t_sigma - 6.3).abs() <= 0.3
        && elapsed < Duration::from_secs(1);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    outcome(
        pass,
        format!(
            "intrinsic [{}] K, input-referred [{}] K, T_sigma {:.3} K, {:?}",
            fmt(&intrinsic),
            fmt(&referred),
            avg.t_sigma,
            elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..=14 {
        let eta_2 = 0.3 + 0.05 * i as f64;
        for j in 0..=15 {
            let chain = Chain {
                eta_1c: 1.0,
                eta_1h: 1.0,
                eta_2,
                gain: 1e6,
                t_ex: 0.0,
                t_h: j as f64,
                cold_bath: 0.03,
            };
            let rep = chain_added_noise(&chain.build(band_grid())).unwrap();
            for n in rep.n_sigma() {
                worst = worst.max((n.quanta() - 0.5).abs());
            }
        }
    }
    outcome(
        worst <= 1e-3,
        format!("max |N_sigma - 0.5| = {worst:.2e} quanta over 240 chains x 21 frequencies"),
    )
}

fn criterion_3() -> Outcome {
    let mut errors = Vec::new();
    for g_db in [13.0, 18.0, 23.0, 30.0] {
        let cfg = Chain {
            gain: db(g_db),
            ..Chain::reference_chain()
        }
        .build(band_grid());
        let simple = chain_added_noise(&cfg).unwrap();
        let exact = propagate_exact(&cfg, Occupancy::vacuum()).unwrap();
        let worst = simple
            .points
            .iter()
            .zip(&exact)
            .map(|(s, e)| rel_err(e.added_input_referred, s.n_sigma.quanta()))
            .fold(0.0, f64::max);
        errors.push((g_db, worst));
    }
    let at_18 = errors[1].1;
    let monotone = errors.windows(2).all(|w| w[1].1 < w[0].1);
    let listing = errors
        .iter()
        .map(|(g, e)| format!("{g} dB: {:.3}%", 100.0 * e))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        at_18 <= 0.02 && monotone,
        format!("max relative difference {listing}"),
    )
}

const SHOT_F_GHZ: f64 = 4.5;
const SHOT_GAIN: f64 = 1e6;
const SHOT_N: f64 = 183.0;
const SHOT_T: f64 = 0.04;
const SHOT_V_OFF: f64 = 2e-6;

fn shot_curve(rel_noise: f64, seed: u64) -> NoiseCurve {
    let src = NoiseSource::Sntj(
        SntjParams::sweep(k(SHOT_T), 48.2, SHOT_V_OFF, -250e-6, 250e-6, 501).unwrap(),
    );
    synthesize_curve(
        &src,
        GainLinear::new(SHOT_GAIN).unwrap(),
        Occupancy::new(SHOT_N).unwrap(),
        ghz(SHOT_F_GHZ),
        rel_noise,
        seed,
    )
    .unwrap()
}

fn threshold_inclusion() -> bool {
    let f = ghz(SHOT_F_GHZ);
    // Bias at exactly 2.9 and 3.1 quanta on each branch.
    let v = |q: f64| {
        q * 2.0 * cryochain::quanta::PLANCK * f.hertz() / cryochain::quanta::ELEMENTARY_CHARGE
    };
    let x = vec![-v(3.1), -v(2.9), 0.0, v(2.9), v(3.1)];
    let curve = NoiseCurve::new(f, AxisKind::Volts, x, vec![1.0; 5]).unwrap();
    let edge = asymptotic_mask(&curve, f) == [true, false, false, false, true];
    let sweep = shot_curve(0.0, 0);
    let consistent = asymptotic_mask(&sweep, f)
        .iter()
        .zip(&sweep.x)
        .all(|(&m, &v)| m == (shot_asymptote_quanta(v, f) > 3.0));
    edge && consistent
}

fn criterion_4() -> Outcome {
    let f = ghz(SHOT_F_GHZ);
    let opts = ShotFitOptions::default();
    let mut times = Vec::new();
    let (mut worst_n, mut worst_v, mut worst_g) = (0.0f64, 0.0f64, 0.0f64);
    let mut passing = 0;
    let mut failures = 0;
    for seed in 0..20 {
        let curve = shot_curve(0.005, seed);
        let start = Instant::now();
        let fit = fit_shot(&curve, f, &opts);
        times.push(start.elapsed());
        let Ok(fit) = fit else {
            failures += 1;
            continue;
        };
        let e_n = rel_err(fit.n_sigma_off.quanta(), SHOT_N);
        let e_v = (fit.v_offset - SHOT_V_OFF).abs();
        let e_g = rel_err(fit.chain_gain.ratio(), SHOT_GAIN);
        worst_n = worst_n.max(e_n);
        worst_v = worst_v.max(e_v);
        worst_g = worst_g.max(e_g);
        if e_n <= 0.02 && e_v <= 0.5e-6 && e_g <= 0.01 {
            passing += 1;
        }
    }
    times.sort();
    let median = (times[9] + times[10]) / 2;
    let threshold = threshold_inclusion();
    let pass = passing == 20 && median < Duration::from_millis(100) && threshold;
    outcome(
        pass,
        format!(
            "{passing}/20 seeds within tolerance ({failures} fit errors); worst N' {:.2}%, \
             V_off {:.2} uV, G_c {:.2}%; median {:?}; threshold inclusion {}",
            100.0 * worst_n,
            worst_v * 1e6,
            100.0 * worst_g,
            median,
            if threshold { "ok" } else { "wrong" }
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_h, mut worst_ex) = (0.0f64, 0.0f64);
    let mut errors = 0;
    for _ in 0..100 {
        let chain = Chain {
            eta_1c: rng.random_range(0.5..=1.0),
            eta_1h: rng.random_range(0.5..=1.0),
            eta_2: rng.random_range(0.5..=1.0),
            gain: db(rng.random_range(10.0..=40.0)),
            t_ex: rng.random_range(0.0..=5.0),
            t_h: rng.random_range(2.0..=20.0),
            cold_bath: 0.03,
        };
        let cfg = chain.build(band_grid());
        let off = chain_added_noise_off(&cfg).unwrap();
        let on = chain_added_noise(&cfg).unwrap().t_sigma();
        match (
            infer_follower_noise(&cfg, &off),
            infer_excess_noise(&cfg, &on),
        ) {
            (Ok(h), Ok(ex)) => {
                for t in h {
                    worst_h = worst_h.max(rel_err(t.kelvin(), chain.t_h));
                }
                for t in ex {
                    worst_ex = worst_ex.max((t.kelvin() - chain.t_ex).abs() / chain.t_ex.max(1e-3));
                }
            }
            _ => errors += 1,
        }
    }
    outcome(
        errors == 0 && worst_h <= 1e-9 && worst_ex <= 1e-9,
        format!(
            "100 chains: worst relative error T_H {worst_h:.1e}, T_ex {worst_ex:.1e}, {errors} errors"
        ),
    )
}

fn criterion_6() -> Outcome {
    let path = vec![
        PumpElement::Attenuator {
            label: "att_4k".into(),
            attenuation_db: 10.0,
            stage_temp_k: 4.0,
        },
        PumpElement::Coupler {
            label: "coupler".into(),
            coupling_db: 10.0,
            stage_temp_k: 0.03,
            termination_temp_k: 4.0,
        },
    ];
    let b = pump_dissipation(PowerDbm::new(-30.0).unwrap(), &path).unwrap();
    let single_stage = b.by_stage.len() == 1 && b.by_stage[0].stage_temp.kelvin() == 4.0;
    let at_4k = b.by_stage[0].dissipated.watts();
    let reference = single_stage && rel_err(at_4k, 99e-6) <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let path: Vec<PumpElement> = (0..n)
            .map(|i| {
                let temp = [0.01, 0.1, 0.8, 4.0, 50.0][rng.random_range(0..5)];
                if rng.random_bool(0.5) {
                    PumpElement::Attenuator {
                        label: format!("a{i}"),
                        attenuation_db: rng.random_range(0.0..=20.0),
                        stage_temp_k: temp,
                    }
                } else {
                    PumpElement::Coupler {
                        label: format!("c{i}"),
                        coupling_db: rng.random_range(0.0..=20.0),
                        stage_temp_k: temp,
                        termination_temp_k: [0.01, 4.0][rng.random_range(0..2)],
                    }
                }
            })
            .collect();
        let delivered = PowerDbm::new(rng.random_range(-80.0..=-10.0)).unwrap();
        let b = pump_dissipation(delivered, &path).unwrap();
        let balance = b.delivered.watts() + b.total_dissipated();
        let staged: f64 = b.by_stage.iter().map(|s| s.dissipated.watts()).sum();
        worst = worst
            .max(rel_err(balance, b.input.watts()))
            .max(rel_err(staged, b.input.watts() - b.delivered.watts()));
    }
    outcome(
        reference && worst <= 1e-12,
        format!(
            "reference path {:.6} uW at 4 K; energy balance worst {worst:.1e} over 1000 paths",
            at_4k * 1e6
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(0.5..=100.0);
        let n_off = rng.random_range(0.5..=500.0);
        let g = GainLinear::new(db(rng.random_range(0.0..=40.0))).unwrap();
        let r = noise_rise(
            Occupancy::new(n).unwrap(),
            Occupancy::new(n_off).unwrap(),
            g,
        )
        .unwrap();
        let back = noise_from_rise(r, g, Occupancy::new(n_off).unwrap()).unwrap();
        worst = worst.max(rel_err(back.quanta(), n));
    }
    outcome(
        worst <= 1e-12,
        format!("worst relative error {worst:.1e} over 10^4 draws"),
    )
}

fn criterion_8() -> Outcome {
    let g_vts = GainLinear::new(2.7e6).unwrap();
    let g_sntj = GainLinear::new(0.93 * 2.7e6).unwrap();
    let p = infer_packaging_efficiency(g_sntj, g_vts).unwrap();
    let ok = (p.ratio - 0.93).abs() <= 1e-12 && !p.exceeds_unity;
    outcome(
        ok,
        format!(
            "eta_p {:.12} ({:.3} dB); see criterion 5 for the inference workflow",
            p.ratio,
            p.insertion_loss_db()
        ),
    )
}

fn criterion_9() -> Outcome {
    let f = ghz(SHOT_F_GHZ);
    let curve = shot_curve(0.005, 9);
    let model = ShotModel::new(&curve.x, &curve.y, SHOT_GAIN, f);
    let mut worst_jac = 0.0f64;
    for p in [
        [SHOT_N, SHOT_T, SHOT_V_OFF],
        [150.0, 0.01, -5e-6],
        [200.0, 0.5, 20e-6],
    ] {
        let j = model.model_jacobian(&p);
        let steps = [1e-3 * p[0], 1e-4 * p[1], 1e-9];
        for (c, h) in steps.iter().enumerate() {
            let (mut hi, mut lo) = (p, p);
            hi[c] += h;
            lo[c] -= h;
            let (yh, yl) = (model.predict(&hi), model.predict(&lo));
            let scale = j.column(c).amax();
            for i in 0..curve.len() {
                let fd = (yh[i] - yl[i]) / (2.0 * h);
                worst_jac = worst_jac.max((fd - j[(i, c)]).abs() / scale);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_even, mut min_occ) = (0.0f64, f64::INFINITY);
    for _ in 0..10_000 {
        let v = rng.random_range(-2e-3..=2e-3);
        let t = k(rng.random_range(0.0..=5.0));
        let f = ghz(rng.random_range(1.0..=12.0));
        let a = sntj_occupancy(v, t, f).unwrap().quanta();
        let b = sntj_occupancy(-v, t, f).unwrap().quanta();
        worst_even = worst_even.max((a - b).abs() / a);
        min_occ = min_occ.min(a).min(b);
    }
    outcome(
        worst_jac <= 1e-5 && worst_even == 0.0 && min_occ >= 0.5,
        format!(
            "Jacobian vs central differences {worst_jac:.1e}; SNTJ asymmetry {worst_even:.1e}, \
             minimum {min_occ:.6} quanta over 10^4 points"
        ),
    )
}

/// Stage-2 shot fit: N_Σ' within 2%, V_off within 0.5 µV and T within 20%
/// over 20 seeds.
fn example_shot_stage2() -> Outcome {
    let f = ghz(SHOT_F_GHZ);
    let opts = ShotFitOptions::default();
    let (mut worst_n, mut worst_v, mut worst_t) = (0.0f64, 0.0f64, 0.0f64);
    let mut passing = 0;
    for seed in 100..120 {
        let Ok(fit) = fit_shot(&shot_curve(0.005, seed), f, &opts) else {
            continue;
        };
        let e_n = rel_err(fit.n_sigma_off.quanta(), SHOT_N);
        let e_v = (fit.v_offset - SHOT_V_OFF).abs();
        let e_t = rel_err(fit.source_temp.kelvin(), SHOT_T);
        worst_n = worst_n.max(e_n);
        worst_v = worst_v.max(e_v);
        worst_t = worst_t.max(e_t);
        if e_n <= 0.02 && e_v <= 0.5e-6 && e_t <= 0.2 {
            passing += 1;
        }
    }
    outcome(
        passing == 20,
        format!(
            "{passing}/20 seeds within tolerance; worst N' {:.2}%, V_off {:.2} uV, T {:.0}%",
            100.0 * worst_n,
            worst_v * 1e6,
            100.0 * worst_t
        ),
    )
}

/// Johnson fit with stages at 0.1, 1 and 4 K and 1% noise: N_Σ2 within 3%
/// over 20 seeds.
fn example_johnson() -> Outcome {
    let f = ghz(SHOT_F_GHZ);
    let n_sigma = 3.5 / f.quantum_temperature();
    let src = NoiseSource::Vts(VtsParams::new(vec![k(0.1), k(1.0), k(4.0)]).unwrap());
    let mut worst = 0.0f64;
    let mut passing = 0;
    for seed in 0..20 {
        let curve = synthesize_curve(
            &src,
            GainLinear::new(1e5).unwrap(),
            Occupancy::new(n_sigma).unwrap(),
            f,
            0.01,
            seed,
        )
        .unwrap();
        let Ok(fit) = fit_johnson_curve(&curve, f) else {
            continue;
        };
        let e = rel_err(fit.n_sigma.quanta(), n_sigma);
        worst = worst.max(e);
        if e <= 0.03 {
            passing += 1;
        }
    }
    outcome(
        passing == 20,
        format!(
            "N_sigma {n_sigma:.2} quanta: {passing}/20 seeds within 3%, worst {:.2}%",
            100.0 * worst
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Check; 9] = [
        ("reference chain budget", criterion_1),
        ("quantum limit", criterion_2),
        ("exact vs simplified", criterion_3),
        ("shot fit round trip", criterion_4),
        ("inference identities", criterion_5),
        ("pump budget", criterion_6),
        ("noise-rise round trip", criterion_7),
        ("packaging efficiency", criterion_8),
        ("numerical hygiene", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {:<22} {}  {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );

    let examples: [Check; 2] = [
        ("shot fit stage 2", example_shot_stage2),
        ("johnson fit", example_johnson),
    ];
    for (name, check) in examples {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "supplementary {:<18} {}  {}",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
