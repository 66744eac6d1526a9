//! Acceptance suite: the eleven headline criteria at their stated
//! tolerances and time budgets. Runs sequentially in one test so the
//! timings are not distorted by sibling tests; prints one PASS/FAIL line
//! per criterion and fails if any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use xpoint_core::control::{
    kapitza_threshold_scan, run_ponderomotive, viscosity_scan, ControlPolicy, DwellScenario, PonderomotiveOptions,
};
use xpoint_core::dynamics::energy;
use xpoint_core::equilibria::{
    find_beta_star, find_equilibria, geodesic_flow, omega_at_separatrix, orbit_summary, period_log_fit, smatrix_coeffs,
    ComplexRect,
};
use xpoint_core::hjb::{
    closed_orbit_integral, hjb_residual, solve_characteristics, solve_viscous, trajectory_value, Branch, HjbConfig,
    Region,
};
use xpoint_core::hst::{activation, amplitude_shift_check, build_filterbank, hst_forward, HstOptions, Pooling};
use xpoint_core::models::{make_joukowski, make_kapitza, AnalyticHamiltonian, DoubleWell, Pendulum};
use xpoint_core::rom::{
    evaluate_rom, make_pairs, pendulum_dataset, phase_space_scale, rom_grad_check, rom_init, rom_train, DatasetConfig,
    RomSizes, TrainConfig,
};
use xpoint_core::{integrate, EquilibriumKind, IntegratorConfig, ModelSpec, PhaseState, Rect, Scheme};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn equilibrium_structure() -> Check {
    let dw = find_equilibria(&DoubleWell, Rect::new(-2.0, 2.0, -2.0, 2.0), 9).map_err(e)?;
    ensure(dw.len() == 3, format!("double well: {} equilibria", dw.len()))?;
    let mut worst: f64 = 0.0;
    for eq in &dw {
        let (want_q, kind, lam) = if eq.q.abs() < 0.5 {
            (0.0, EquilibriumKind::XPoint, [c(1.0, 0.0), c(-1.0, 0.0)])
        } else {
            (
                eq.q.signum(),
                EquilibriumKind::OPoint,
                [c(0.0, 2f64.sqrt()), c(0.0, -2f64.sqrt())],
            )
        };
        ensure(eq.kind == kind, format!("wrong kind at q={}", eq.q))?;
        worst = worst.max((eq.q - want_q).abs()).max(eq.p.abs());
        // eigenvalues as an unordered pair
        let direct = (eq.eigenvalues[0] - lam[0])
            .norm()
            .max((eq.eigenvalues[1] - lam[1]).norm());
        let swapped = (eq.eigenvalues[0] - lam[1])
            .norm()
            .max((eq.eigenvalues[1] - lam[0]).norm());
        worst = worst.max(direct.min(swapped));
    }
    ensure(worst < 1e-8, format!("double well deviation {worst:.2e}"))?;

    let pd = find_equilibria(&Pendulum, Rect::new(-FRAC_PI_2, 1.5 * PI, -1.0, 1.0), 12).map_err(e)?;
    ensure(pd.len() == 2, format!("pendulum: {} equilibria", pd.len()))?;
    let o = pd
        .iter()
        .find(|x| x.kind == EquilibriumKind::OPoint)
        .ok_or("pendulum o-point missing")?;
    let x = pd
        .iter()
        .find(|x| x.kind == EquilibriumKind::XPoint)
        .ok_or("pendulum x-point missing")?;
    ensure(
        o.q.abs() < 1e-8 && (x.q - PI).abs() < 1e-8,
        format!("pendulum at {} and {}", o.q, x.q),
    )?;
    Ok(format!(
        "double well max deviation {worst:.1e}; pendulum o at {:.1e}, x at pi{:+.1e}",
        o.q,
        x.q - PI
    ))
}

fn max_drift(dt: f64, steps: usize) -> Result<f64, String> {
    let s0 = PhaseState::new(1.0, 0.0, 0.0);
    let e0 = energy(&Pendulum, &s0);
    let t = integrate(
        &Pendulum,
        s0,
        &IntegratorConfig::new(dt, steps, 1, Scheme::Leapfrog),
        None,
    )
    .map_err(e)?;
    Ok(t.samples
        .iter()
        .map(|s| (energy(&Pendulum, s) - e0).abs())
        .fold(0.0, f64::max))
}

fn conservation() -> Check {
    let d1 = max_drift(1e-3, 1_000_000)?;
    let d2 = max_drift(5e-4, 2_000_000)?;
    let ratio = d1 / d2;
    ensure(d1 < 1e-6, format!("|dH| = {d1:.3e}"))?;
    ensure((ratio / 4.0 - 1.0).abs() <= 0.2, format!("halving ratio {ratio:.3}"))?;
    Ok(format!("max |dH| {d1:.3e} at dt=1e-3, halving ratio {ratio:.3}"))
}

fn pendulum_points() -> Result<(xpoint_core::Equilibrium, xpoint_core::Equilibrium), String> {
    let eq = find_equilibria(&Pendulum, Rect::new(-FRAC_PI_2, 1.5 * PI, -1.0, 1.0), 12).map_err(e)?;
    let o = eq
        .iter()
        .find(|x| x.kind == EquilibriumKind::OPoint)
        .cloned()
        .ok_or("no o-point")?;
    let x = eq
        .iter()
        .find(|x| x.kind == EquilibriumKind::XPoint)
        .cloned()
        .ok_or("no x-point")?;
    Ok((o, x))
}

fn separatrix_slowdown() -> Check {
    let (o, x) = pendulum_points()?;
    let eps: Vec<f64> = (0..9).map(|k| 10f64.powf(-6.0 + 0.5 * k as f64)).collect();
    let table = omega_at_separatrix(&Pendulum, &x, &o, &eps).map_err(e)?;
    let fit = period_log_fit(&eps, &table);
    ensure((fit.slope / 2.0 - 1.0).abs() < 0.05, format!("slope {:.4}", fit.slope))?;
    // omega over the whole approach, from deep in the well to 1e-8 below E_s
    let deep: Vec<f64> = (0..30)
        .map(|k| 10f64.powf(-8.0 + 0.25 * k as f64))
        .filter(|v| *v < 1.9)
        .collect();
    let approach = omega_at_separatrix(&Pendulum, &x, &o, &deep).map_err(e)?;
    let omegas: Vec<f64> = approach.iter().map(|s| s.omega_q).collect();
    ensure(
        omegas.windows(2).all(|w| w[1] > w[0]),
        "omega_Q not strictly monotone in E_s - E",
    )?;
    // near the separatrix the pendulum period tends to 2 ln(32 / eps)
    let asymptote = PI / (32e8f64).ln();
    let tail_err = (omegas[0] / asymptote - 1.0).abs();
    ensure(
        tail_err < 0.01,
        format!("omega_Q at 1e-8 is {:.5}, asymptote {asymptote:.5}", omegas[0]),
    )?;
    Ok(format!(
        "slope {:.4} (R^2 {:.6}); omega_Q falls monotonically to {:.4} at E_s - E = 1e-8",
        fit.slope, fit.r_squared, omegas[0]
    ))
}

fn duality_for(model: &dyn ModelSpec, center: f64, e_lo: f64, e_hi: f64) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let en = e_lo + (e_hi - e_lo) * k as f64 / 19.0;
        let s = orbit_summary(model, en, center).map_err(e)?;
        worst = worst.max((s.omega_q_fd / s.omega_q - 1.0).abs());
    }
    Ok(worst)
}

fn duality() -> Check {
    let p = duality_for(&Pendulum, 0.0, -0.98, 0.98)?;
    let d = duality_for(&DoubleWell, 1.0, 0.0025, 0.2475)?;
    ensure(p < 5e-3 && d < 5e-3, format!("pendulum {p:.2e}, double well {d:.2e}"))?;
    Ok(format!(
        "max |dE/dJ / (2pi/T) - 1|: pendulum {p:.2e}, double well {d:.2e}"
    ))
}

fn ponderomotive() -> Check {
    let scan = kapitza_threshold_scan(0.1, (5.0, 30.0), 11, 0.01, 200.0, 0.05).map_err(e)?;
    let thr_err = (scan.threshold / scan.predicted - 1.0).abs();
    ensure(thr_err < 0.15, format!("threshold {:.3}", scan.threshold))?;
    let base = make_kapitza(0.0, 30.0).map_err(e)?;
    let policy = ControlPolicy::Ponderomotive { a: 0.1, omega: 30.0 };
    let r = run_ponderomotive(
        &base,
        &policy,
        PhaseState::new(0.01, 0.0, 0.0),
        1000.0,
        &PonderomotiveOptions::default(),
    )
    .map_err(e)?;
    ensure(r.dwell.dwell_time >= 1000.0, format!("dwell {:.2}", r.dwell.dwell_time))?;
    let (meas, pred) = (
        r.secular_frequency.ok_or("no secular frequency")?,
        r.predicted_frequency.ok_or("no prediction")?,
    );
    let f_err = (meas / pred - 1.0).abs();
    ensure(f_err < 0.05, format!("secular {meas:.4} vs {pred:.4}"))?;
    Ok(format!(
        "threshold {:.3} vs {:.3} ({:.2}%); dwell {:.1}; secular {:.4} vs {:.4} ({:.2}%)",
        scan.threshold,
        scan.predicted,
        100.0 * thr_err,
        r.dwell.dwell_time,
        meas,
        pred,
        100.0 * f_err
    ))
}

fn viscosity() -> Check {
    let grid = [0.0, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0];
    let scan = viscosity_scan(&DoubleWell, &grid, &DwellScenario::double_well_demo()).map_err(e)?;
    ensure(scan.dwell_monotone(), "dwell time increases somewhere")?;
    ensure(scan.value_monotone(), "discounted value increases somewhere")?;
    let last = scan.rows.last().ok_or("empty scan")?;
    Ok(format!(
        "dwell {:.2} -> {:.2}, value monotone; demo V-ratio at nu=1: {:.4} (reported)",
        scan.rows[0].dwell_time, last.dwell_time, last.ratio
    ))
}

fn hjb() -> Check {
    let mut worst_res: f64 = 0.0;
    let mut worst_loop: f64 = 0.0;
    for (model, en, center) in [(&Pendulum as &dyn ModelSpec, 0.0, 0.0), (&DoubleWell, 0.125, -1.0)] {
        for branch in [Branch::Upper, Branch::Lower] {
            let s = solve_characteristics(model, en, branch, Region::Well { center }, 4096).map_err(e)?;
            worst_res = worst_res.max(hjb_residual(model, &s));
        }
        let total = closed_orbit_integral(model, en, center, 4096).map_err(e)?;
        let two_pi_j = 2.0 * PI * orbit_summary(model, en, center).map_err(e)?.action;
        worst_loop = worst_loop.max((total / two_pi_j - 1.0).abs());
    }
    ensure(worst_res < 1e-6, format!("residual {worst_res:.2e}"))?;
    ensure(worst_loop < 1e-4, format!("loop integral error {worst_loop:.2e}"))?;

    let cfg = HjbConfig {
        nu: 2.0,
        grid_n: 4001,
        max_iter: 500,
        tol: 1e-12,
        q_min: -2.0,
        q_max: 2.0,
    };
    let reward = |q: f64| (-q * q / 0.5).exp();
    let sol = solve_viscous(&DoubleWell, reward, &cfg).map_err(e)?;
    let mut worst_probe: f64 = 0.0;
    for k in 0..10 {
        let q0 = -1.8 + 3.6 * k as f64 / 9.0;
        let want = trajectory_value(&DoubleWell, reward, cfg.nu, q0, 1.0, 1e-3);
        worst_probe = worst_probe.max((sol.value_at(q0) / want - 1.0).abs());
    }
    ensure(worst_probe < 0.01, format!("probe error {worst_probe:.2e}"))?;
    for nu in [0.5, 2.0] {
        let flat = solve_viscous(&DoubleWell, |_| 1.0, &HjbConfig { nu, ..cfg }).map_err(e)?;
        ensure(
            flat.values.iter().all(|&v| v == 1.0 / nu),
            format!("R = 1 not exact at nu={nu}"),
        )?;
    }
    Ok(format!(
        "residual {worst_res:.1e}; loop vs 2piJ {worst_loop:.1e}; viscous vs trajectories {:.3}%; R=1 exact",
        100.0 * worst_probe
    ))
}

fn hst() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        for j in 0..100 {
            let z = c(-10.0 + 20.0 * i as f64 / 99.0, -10.0 + 20.0 * j as f64 / 99.0);
            worst = worst.max((activation(z).sin() - z / FRAC_PI_2).norm());
        }
    }
    ensure(worst < 1e-12, format!("branch identity {worst:.2e}"))?;
    let at_pi = (activation(c(PI, 0.0)) - c(FRAC_PI_2, (2.0 + 3f64.sqrt()).ln())).norm();
    ensure(at_pi < 1e-12, format!("activation(pi) off by {at_pi:.2e}"))?;

    let bank = build_filterbank(256, 4, FRAC_PI_2, None).map_err(e)?;
    let flat = hst_forward(
        &vec![c(0.7, -0.2); 256],
        &bank,
        &HstOptions {
            m_max: 3,
            ..Default::default()
        },
    )
    .map_err(e)?;
    ensure(
        flat.paths[1..]
            .iter()
            .all(|p| p.pooled.iter().all(|v| v.re == 0.0 && v.im == 0.0)),
        "constant signal leaves nonzero coefficients",
    )?;

    let bank = build_filterbank(512, 5, FRAC_PI_2, None).map_err(e)?;
    let f: Vec<Complex64> = (0..512)
        .map(|x| {
            let t = x as f64 / 512.0;
            c(
                (2.0 * PI * 7.0 * t).sin() + 0.3 * (2.0 * PI * 40.0 * t).cos() + 0.1 * t,
                0.0,
            )
        })
        .collect();
    let opts = HstOptions {
        pooling: Pooling::Global,
        ..Default::default()
    };
    let a = hst_forward(&f, &bank, &opts).map_err(e)?;
    let mut g = f.clone();
    g.rotate_right(37);
    let b = hst_forward(&g, &bank, &opts).map_err(e)?;
    let shift = a
        .flatten()
        .iter()
        .zip(b.flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    ensure(shift <= 1e-10, format!("shift invariance {shift:.2e}"))?;

    // a tone at the centre of octave j must peak on path [j]
    let bank = build_filterbank(1024, 6, FRAC_PI_2, None).map_err(e)?;
    for j in 1..6 {
        let bin = 256.0 / 2f64.powi(j as i32);
        let tone: Vec<Complex64> = (0..1024)
            .map(|x| c((2.0 * PI * bin * x as f64 / 1024.0).cos(), 0.0))
            .collect();
        let out = hst_forward(
            &tone,
            &bank,
            &HstOptions {
                m_max: 1,
                ..Default::default()
            },
        )
        .map_err(e)?;
        let best = out.paths[1..]
            .iter()
            .max_by(|p, q| p.energy.total_cmp(&q.energy))
            .ok_or("no paths")?;
        ensure(
            best.path == vec![j],
            format!("tone on bin {bin} peaks on {:?}", best.path),
        )?;
    }
    let d = amplitude_shift_check(c(1000.0, 0.0), 10.0);
    let log_err = (d - c(0.0, 10f64.ln())).norm();
    ensure(log_err < 1e-4, format!("large-amplitude shift off by {log_err:.2e}"))?;
    Ok(format!(
        "identity {worst:.1e}; activation(pi) {at_pi:.1e}; constant null exactly; shift {shift:.1e}; tones on octaves 1-5; log shift {log_err:.1e}"
    ))
}

fn rom() -> Check {
    let fresh = rom_init(&RomSizes::with_hidden(64), 0).map_err(e)?;
    let data = pendulum_dataset(&DatasetConfig::default()).map_err(e)?;
    let cfg = TrainConfig::default();
    let pairs = make_pairs(&data, &cfg.taus).map_err(e)?;
    let batch: Vec<_> = (0..4).map(|i| pairs[(2 * i + 1) * pairs.len() / 8]).collect();
    let gc = rom_grad_check(&fresh, &batch, 1.0, 1.0, 0).map_err(e)?;
    ensure(gc.max_rel_error < 1e-4, format!("grad check {:.2e}", gc.max_rel_error))?;

    let t0 = Instant::now();
    let trained = rom_train(&pairs, &cfg).map_err(e)?;
    let train_time = t0.elapsed();
    let held = pendulum_dataset(&DatasetConfig {
        n_trajectories: 20,
        seed: 99,
        ..Default::default()
    })
    .map_err(e)?;
    let ev = evaluate_rom(&trained.params, &held, phase_space_scale(&data)).map_err(e)?;
    let detail = format!(
        "grad check {:.1e}; trained in {:.0}s: recon {:.2}%, P CoV {:.2}%, Q R^2 {:.6}, one-period {:.2}%",
        gc.max_rel_error,
        train_time.as_secs_f64(),
        100.0 * ev.recon_rms,
        100.0 * ev.p_cov_max,
        ev.q_r2_min,
        100.0 * ev.period_pred_rms
    );
    ensure(
        train_time < Duration::from_secs(600),
        format!("training took too long: {detail}"),
    )?;
    ensure(
        ev.recon_rms < 0.02 && ev.p_cov_max < 0.05 && ev.q_r2_min > 0.99 && ev.period_pred_rms < 0.05,
        detail.clone(),
    )?;
    Ok(detail)
}

fn geodesics() -> Check {
    let j = make_joukowski();
    let stars = find_beta_star(&j, ComplexRect::new(-3.0, 3.0, -3.0, 3.0), 12).map_err(e)?;
    ensure(stars.len() == 2, format!("{} singular points", stars.len()))?;
    let star_err = (stars[0].beta - c(-1.0, 0.0))
        .norm()
        .max((stars[1].beta - c(1.0, 0.0)).norm());
    ensure(star_err < 1e-10, format!("beta* off by {star_err:.2e}"))?;

    let (mut re_drift, mut im_drop): (f64, f64) = (0.0, 0.0);
    for k in 0..20 {
        // Im H > 0 on the upper half plane outside the unit circle and vanishes
        // on its boundary, so flows seeded there never reach the pole at 0
        let r = if k % 2 == 0 { 1.3 } else { 2.2 };
        let phi = 0.2 + (PI - 0.4) * (k / 2) as f64 / 9.0;
        let seed = Complex64::from_polar(r, phi);
        let path = geodesic_flow(&j, seed, 1e-3, 1000).map_err(e)?;
        let h0 = j.value(seed).map_err(e)?;
        let mut last = h0.im;
        for z in &path {
            let h = j.value(*z).map_err(e)?;
            re_drift = re_drift.max((h.re - h0.re).abs());
            im_drop = im_drop.max(last - h.im);
            last = h.im;
        }
    }
    ensure(re_drift < 1e-8, format!("Re H drift {re_drift:.2e}"))?;
    ensure(im_drop <= 0.0, format!("Im H decreased by {im_drop:.2e}"))?;

    let s = smatrix_coeffs(&j, c(2.0, 0.0), 2, None).map_err(e)?;
    let s_err = (s[0] - c(0.0, 1.25)).norm().max((s[1] - c(0.0, 0.375)).norm());
    ensure(s_err < 1e-10, format!("S-matrix off by {s_err:.2e}"))?;
    Ok(format!(
        "beta* {star_err:.1e}; Re H drift {re_drift:.1e} over 20 flows; Im H never decreases; S-matrix {s_err:.1e}"
    ))
}

const SMALL_ROM: &str = r#"{"rom": {"dataset": {"n_trajectories": 12}, "held_out": {"n_trajectories": 3, "seed": 99},
    "train": {"hidden": 16, "epochs": 30, "batches_per_epoch": 2, "batch_size": 32}, "grad_check_hidden": 16}}"#;

fn xpoint(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_xpoint"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .env_remove("XPOINT_SEED")
        .env_remove("XPOINT_MODEL")
        .env_remove("XPOINT_CONFIG")
        .output()
        .map_err(e)?;
    ensure(
        out.status.success(),
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn without_wall_time(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn same_outputs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a).map_err(e)?.map(|d| d.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        let (x, y) = (fs::read(a.join(name)).map_err(e)?, fs::read(b.join(name)).map_err(e)?);
        let same = if name == "manifest.json" {
            without_wall_time(&String::from_utf8_lossy(&x)) == without_wall_time(&String::from_utf8_lossy(&y))
        } else {
            x == y
        };
        ensure(same, format!("{} differs after replay", a.join(name).display()))?;
    }
    Ok(names.len())
}

fn reproducibility() -> Check {
    let tmp = tempfile::tempdir().map_err(e)?;
    let root = tmp.path();
    let small = root.join("small_rom.json");
    fs::write(&small, SMALL_ROM).map_err(e)?;
    let small = small.to_str().unwrap().to_string();
    let with_params = SMALL_ROM.replacen(
        r#""rom": {"#,
        &format!(
            r#""rom": {{"params": {:?}, "#,
            root.join("rom_train").join("rom").to_str().unwrap()
        ),
        1,
    );
    let predict_cfg = root.join("predict.json");
    fs::write(&predict_cfg, with_params).map_err(e)?;
    let predict_cfg = predict_cfg.to_str().unwrap().to_string();

    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("simulate", vec!["simulate"]),
        ("equilibria", vec!["--model", "double_well", "equilibria"]),
        ("separatrix", vec!["separatrix"]),
        ("orbit", vec!["orbit"]),
        ("stimulus", vec!["--model", "double_well", "control", "stimulus"]),
        ("viscosity", vec!["--model", "double_well", "control", "viscosity"]),
        ("threshold", vec!["control", "threshold"]),
        ("ponderomotive", vec!["--model", "kapitza", "control", "ponderomotive"]),
        (
            "hjb_characteristics",
            vec!["--model", "double_well", "hjb", "characteristics"],
        ),
        ("hjb_viscous", vec!["--model", "double_well", "hjb", "viscous"]),
        ("hst", vec!["--config", "fixtures/tone.json", "hst"]),
        ("rom_dataset", vec!["--config", &small, "rom", "dataset"]),
        ("rom_train", vec!["--config", &small, "--seed", "3", "rom", "train"]),
        ("rom_predict", vec!["--config", &predict_cfg, "rom", "predict"]),
        ("rom_grad_check", vec!["--config", &small, "rom", "grad-check"]),
    ];
    let mut files = 0;
    for (name, args) in &runs {
        let first = root.join(name);
        let again = root.join(format!("{name}_replay"));
        let mut full = args.clone();
        full.extend(["--out", first.to_str().unwrap()]);
        xpoint(&full)?;
        let manifest = first.join("manifest.json");
        xpoint(&["replay", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()])?;
        files += same_outputs(&first, &again)?;
    }
    Ok(format!(
        "{} commands replayed from their manifests, {files} files byte-identical",
        runs.len()
    ))
}

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        ("equilibrium structure", Duration::from_secs(1), equilibrium_structure),
        ("conservation", Duration::from_secs(30), conservation),
        ("separatrix slowdown", Duration::from_secs(10), separatrix_slowdown),
        ("action-frequency duality", Duration::from_secs(30), duality),
        ("ponderomotive stabilization", Duration::from_secs(120), ponderomotive),
        ("viscosity degradation", Duration::from_secs(120), viscosity),
        ("HJB", Duration::from_secs(60), hjb),
        ("HST", Duration::from_secs(30), hst),
        // the ROM budget applies to training, which the check times itself
        ("ROM", Duration::MAX, rom),
        ("analytic geodesics", Duration::from_secs(10), geodesics),
        ("reproducibility", Duration::MAX, reproducibility),
    ];
    let mut failures = Vec::new();
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = match result {
            Ok(d) if took > budget => Err(format!(
                "{d}; took {:.1}s, budget {:.0}s",
                took.as_secs_f64(),
                budget.as_secs_f64()
            )),
            other => other,
        };
        match &result {
            Ok(d) => println!("PASS {:>2} {name} ({:.2}s): {d}", i + 1, took.as_secs_f64()),
            Err(d) => {
                println!("FAIL {:>2} {name} ({:.2}s): {d}", i + 1, took.as_secs_f64());
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed: {failures:?}");
}
