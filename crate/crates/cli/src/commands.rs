//! One runner per subcommand. Each runner may fill in defaults it had to
//! compute (o-points, energies) so the manifest records them.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use xpoint_core::control::{kapitza_threshold_scan, plan_stimulus, run_ponderomotive, viscosity_scan};
use xpoint_core::dynamics::{energy, Forcing};
use xpoint_core::equilibria::{
    find_equilibria, omega_at_separatrix, orbit_summary, period_log_fit, trace_separatrix, SeparatrixInfo,
};
use xpoint_core::hjb::{closed_orbit_integral, hjb_residual, solve_characteristics, solve_viscous, HjbConfig, Region};
use xpoint_core::hst::{build_filterbank, hst_forward, HstOptions};
use xpoint_core::io::fmt_f64;
use xpoint_core::models::make_kapitza;
use xpoint_core::rom::{
    evaluate_rom, load_params, make_pairs, moving_average_monotone, pendulum_dataset, phase_space_scale,
    rom_grad_check as grad_check, rom_init, rom_predict_many, rom_train_with, save_params, write_history_csv, RomSizes,
};
use xpoint_core::{
    integrate, model_by_id, Equilibrium, EquilibriumKind, Error, IntegratorConfig, ModelSpec, PhaseState, Trajectory,
};

use crate::config::{ControlKind, HjbKind, RunConfig};
use crate::error::CliError;
use crate::output::Outputs;

type Run = Result<(), CliError>;

fn model(cfg: &RunConfig) -> Result<Box<dyn ModelSpec>, CliError> {
    Ok(model_by_id(&cfg.model.id, &cfg.model.params)?)
}

fn equilibria(m: &dyn ModelSpec, cfg: &RunConfig) -> Result<Vec<Equilibrium>, CliError> {
    let bounds = cfg.equilibria.bounds.expect("resolved");
    Ok(find_equilibria(m, bounds, cfg.equilibria.grid_n.expect("resolved"))?)
}

fn first(eqs: &[Equilibrium], kind: EquilibriumKind) -> Option<&Equilibrium> {
    eqs.iter().find(|e| e.kind == kind)
}

fn o_point<'a>(m: &dyn ModelSpec, eqs: &'a [Equilibrium]) -> Result<&'a Equilibrium, CliError> {
    first(eqs, EquilibriumKind::OPoint)
        .ok_or_else(|| Error::ModelStructure(m.id().to_string(), "no o-point inside the search box").into())
}

fn x_point<'a>(m: &dyn ModelSpec, eqs: &'a [Equilibrium]) -> Result<&'a Equilibrium, CliError> {
    first(eqs, EquilibriumKind::XPoint)
        .ok_or_else(|| Error::NoXPoint(format!("model `{}` has no x-point inside the search box", m.id())).into())
}

fn separatrix(m: &dyn ModelSpec, cfg: &RunConfig, xp: &Equilibrium) -> Result<SeparatrixInfo, CliError> {
    let s = &cfg.separatrix;
    Ok(trace_separatrix(
        m,
        xp,
        s.ds,
        s.bounds.expect("resolved"),
        s.max_length.expect("resolved"),
    )?)
}

pub fn simulate(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let m = model(cfg)?;
    let s = &cfg.simulate;
    for p in &s.policies.0 {
        p.validate()?;
    }
    let forcing: Option<&dyn Forcing> = if s.policies.0.is_empty() {
        None
    } else {
        Some(&s.policies)
    };
    let icfg = IntegratorConfig::new(s.dt, s.n_steps, s.output_stride, s.scheme);
    let mut traj = integrate(m.as_ref(), PhaseState::new(s.q0, s.p0, 0.0), &icfg, forcing)?;
    traj.seed = cfg.seed;
    out.text("trajectory.csv", |w| traj.write_csv(m.as_ref(), w))?;
    let e0 = energy(m.as_ref(), &traj.samples[0]);
    let drift = traj
        .samples
        .iter()
        .map(|x| (energy(m.as_ref(), x) - e0).abs())
        .fold(0.0, f64::max);
    out.json(
        "summary.json",
        &json!({ "samples": traj.samples.len(), "final_state": traj.last(), "max_energy_deviation": drift }),
    )
}

pub fn equilibria_cmd(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let m = model(cfg)?;
    let eqs = equilibria(m.as_ref(), cfg)?;
    out.json("equilibria.json", &eqs)
}

pub fn separatrix_cmd(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let m = model(cfg)?;
    let eqs = equilibria(m.as_ref(), cfg)?;
    let xp = x_point(m.as_ref(), &eqs)?;
    let sep = separatrix(m.as_ref(), cfg, xp)?;
    out.text("separatrix.csv", |w| sep.write_csv(w))?;
    out.json(
        "separatrix.json",
        &json!({
            "energy": sep.energy,
            "xpoint": sep.xpoint,
            "branch_points": sep.branches.iter().map(Vec::len).collect::<Vec<_>>(),
            "max_energy_error": sep.max_energy_error(m.as_ref()),
        }),
    )
}

pub fn orbit(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let m = model(cfg)?;
    let eqs = equilibria(m.as_ref(), cfg)?;
    let o = o_point(m.as_ref(), &eqs)?.clone();
    let center = *cfg.orbit.center.get_or_insert(o.q);
    let e_o = m.hamiltonian(center, 0.0, 0.0);
    // lowest x-point above the well bounds the closed orbits
    let xp = eqs
        .iter()
        .filter(|e| e.kind == EquilibriumKind::XPoint && e.energy > e_o)
        .min_by(|a, b| a.energy.total_cmp(&b.energy));
    let span = xp.map_or(1.0, |x| x.energy - e_o);
    let e_min = *cfg.orbit.e_min.get_or_insert(e_o + 0.01 * span);
    let e_max = *cfg.orbit.e_max.get_or_insert(e_o + 0.99 * span);
    let n = cfg.orbit.n_energies;
    if n < 2 || !(e_max > e_min) {
        return Err(CliError::Config("orbit needs n_energies >= 2 and e_min < e_max".into()));
    }
    let rows = (0..n)
        .map(|i| orbit_summary(m.as_ref(), e_min + (e_max - e_min) * i as f64 / (n - 1) as f64, center))
        .collect::<Result<Vec<_>, _>>()?;
    out.text("orbit.csv", |w| {
        writeln!(w, "energy,action,omega_q,omega_q_fd,period")?;
        for r in &rows {
            let cols = [r.energy, r.action, r.omega_q, r.omega_q_fd, r.period].map(fmt_f64);
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    })?;
    let log_fit = match xp {
        Some(x) if !cfg.orbit.log_eps.is_empty() => {
            let o_here = Equilibrium { q: center, ..o.clone() };
            let table = omega_at_separatrix(m.as_ref(), x, &o_here, &cfg.orbit.log_eps)?;
            Some(json!({ "eps": cfg.orbit.log_eps, "table": table, "fit": period_log_fit(&cfg.orbit.log_eps, &table) }))
        }
        _ => None,
    };
    out.json(
        "orbit.json",
        &json!({
            "center": center,
            "o_point_energy": e_o,
            "separatrix_energy": xp.map(|x| x.energy),
            "omega_q_monotone_decreasing": rows.windows(2).all(|w| w[1].omega_q < w[0].omega_q),
            "log_period_fit": log_fit,
        }),
    )
}

pub fn control(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    match cfg.control.kind {
        ControlKind::Stimulus => stimulus(cfg, out),
        ControlKind::Viscosity => viscosity(cfg, out),
        ControlKind::Threshold => threshold(cfg, out),
        ControlKind::Ponderomotive => ponderomotive(cfg, out),
    }
}

fn stimulus(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let m = model(cfg)?;
    let eqs = equilibria(m.as_ref(), cfg)?;
    let q0 = match cfg.control.stimulus.q0 {
        Some(q) => q,
        None => o_point(m.as_ref(), &eqs)?.q,
    };
    cfg.control.stimulus.q0 = Some(q0);
    let xp = x_point(m.as_ref(), &eqs)?;
    let sep = separatrix(m.as_ref(), cfg, xp)?;
    let st = &cfg.control.stimulus;
    let plan = plan_stimulus(m.as_ref(), PhaseState::new(q0, st.p0, 0.0), &sep, st.delta, &st.options)?;
    out.json(
        "stimulus.json",
        &json!({ "separatrix_energy": sep.energy, "delta": st.delta, "plan": plan }),
    )
}

fn viscosity(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let m = model(cfg)?;
    let v = &cfg.control.viscosity;
    let scenario = v.scenario.ok_or_else(|| {
        CliError::Config(format!(
            "control.viscosity.scenario is required for model `{}`",
            cfg.model.id
        ))
    })?;
    let scan = viscosity_scan(m.as_ref(), &v.nu_grid, &scenario)?;
    out.text("viscosity.csv", |w| scan.write_csv(w))?;
    out.json(
        "viscosity.json",
        &json!({
            "scan": scan,
            "dwell_monotone": scan.dwell_monotone(),
            "value_monotone": scan.value_monotone(),
        }),
    )
}

fn threshold(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let t = &cfg.control.threshold;
    let scan = kapitza_threshold_scan(t.a, (t.omega_lo, t.omega_hi), t.grid_n, t.theta0, t.duration, t.tol)?;
    out.text("threshold.csv", |w| scan.write_csv(w))?;
    out.json(
        "threshold.json",
        &json!({
            "a": scan.a,
            "threshold": scan.threshold,
            "predicted": scan.predicted,
            "relative_error": (scan.threshold / scan.predicted - 1.0).abs(),
        }),
    )
}

fn ponderomotive(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let pc = &cfg.control.ponderomotive;
    // the drive is the policy, so a kapitza base model is taken undriven
    let base: Box<dyn ModelSpec> = if cfg.model.id == "kapitza" {
        Box::new(make_kapitza(0.0, pc.omega)?)
    } else {
        model(cfg)?
    };
    let eqs = equilibria(base.as_ref(), cfg)?;
    let xp = eqs
        .iter()
        .filter(|e| e.kind == EquilibriumKind::XPoint)
        .min_by(|a, b| a.q.abs().total_cmp(&b.q.abs()))
        .ok_or_else(|| Error::NoXPoint(format!("model `{}` has no x-point to stabilize", base.id())))?;
    let s0 = PhaseState::new(xp.q + pc.theta0, 0.0, 0.0);
    let policy = cfg.ponderomotive_policy();
    let report = run_ponderomotive(base.as_ref(), &policy, s0, pc.duration, &pc.options)?;
    out.text("ponderomotive.csv", |w| report.trajectory.write_csv(base.as_ref(), w))?;
    out.json(
        "ponderomotive.json",
        &json!({
            "policy": policy,
            "start": s0,
            "dwell": report.dwell,
            "secular_frequency": report.secular_frequency,
            "predicted_frequency": report.predicted_frequency,
            "warnings": report.warnings,
        }),
    )
}

pub fn hjb(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let m = model(cfg)?;
    match cfg.hjb.kind {
        HjbKind::Characteristics => {
            let eqs = equilibria(m.as_ref(), cfg)?;
            let o = o_point(m.as_ref(), &eqs)?.clone();
            let region = *cfg.hjb.region.get_or_insert(Region::Well { center: o.q });
            let e_o = o.energy;
            let e_s = eqs
                .iter()
                .filter(|e| e.kind == EquilibriumKind::XPoint && e.energy > e_o)
                .map(|e| e.energy)
                .reduce(f64::min);
            let energy = *cfg.hjb.energy.get_or_insert(e_s.map_or(e_o + 0.5, |s| 0.5 * (e_o + s)));
            let h = &cfg.hjb;
            let gf = solve_characteristics(m.as_ref(), energy, h.branch, region, h.grid_n)?;
            out.text("hjb_characteristics.csv", |w| gf.write_csv(w))?;
            let loop_check = match region {
                Region::Well { center } => {
                    let total = closed_orbit_integral(m.as_ref(), energy, center, h.grid_n)?;
                    let two_pi_j = 2.0 * PI * orbit_summary(m.as_ref(), energy, center)?.action;
                    Some(json!({ "loop_integral": total, "two_pi_action": two_pi_j }))
                }
                Region::Interval { .. } => None,
            };
            out.json(
                "hjb.json",
                &json!({
                    "energy": energy,
                    "branch": h.branch,
                    "region": region,
                    "residual": hjb_residual(m.as_ref(), &gf),
                    "closed_orbit": loop_check,
                }),
            )
        }
        HjbKind::Viscous => {
            let (lo, hi) = {
                let b = cfg.equilibria.bounds.expect("resolved");
                (b.q_min, b.q_max)
            };
            let h = &mut cfg.hjb;
            let q_min = *h.q_min.get_or_insert(lo);
            let q_max = *h.q_max.get_or_insert(hi);
            let hc = HjbConfig {
                nu: h.nu,
                grid_n: h.grid_n,
                max_iter: h.max_iter,
                tol: h.tol,
                q_min,
                q_max,
            };
            let reward = h.reward;
            let sol = solve_viscous(m.as_ref(), |q| reward.eval(q), &hc)?;
            out.text("hjb_value.csv", |w| sol.write_csv(w))?;
            out.json(
                "hjb.json",
                &json!({
                    "nu": sol.nu,
                    "iterations": sol.iterations,
                    "final_residual": sol.residual_history.last(),
                }),
            )
        }
    }
}

fn read_signal(path: &Path) -> Result<Vec<Complex64>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let col = |name: &str| header.iter().position(|c| *c == name);
    let re = col("re").ok_or_else(|| CliError::Config("signal header needs columns `x,re[,im]`".into()))?;
    let im = col("im");
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64, CliError> {
            fields
                .get(i)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("signal row {} is malformed", n + 2)))
        };
        out.push(Complex64::new(get(re)?, im.map(get).transpose()?.unwrap_or(0.0)));
    }
    Ok(out)
}

pub fn hst(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let h = &cfg.hst;
    let signal: Vec<Complex64> = match &h.input {
        Some(path) => read_signal(path)?,
        None => {
            let t = &h.tone;
            (0..t.n)
                .map(|x| Complex64::new(t.amplitude * (2.0 * PI * t.bin * x as f64 / t.n as f64).cos(), 0.0))
                .collect()
        }
    };
    let bank = build_filterbank(signal.len(), h.j, h.xi0, h.sigma)?;
    let opts = HstOptions {
        m_max: h.m_max,
        normalization: h.normalization,
        pooling: h.pooling,
    };
    let coeffs = hst_forward(&signal, &bank, &opts)?;
    out.text("hst.csv", |w| coeffs.write_csv(w))?;
    let argmax = coeffs
        .paths
        .iter()
        .filter(|p| p.order() >= 1)
        .max_by(|a, b| a.energy.total_cmp(&b.energy));
    out.json(
        "hst.json",
        &json!({
            "n": coeffs.n,
            "bank": bank,
            "m_max": coeffs.m_max,
            "pooling": coeffs.pooling,
            "normalization": h.normalization,
            "scale": coeffs.scale,
            "paths": coeffs.paths.len(),
            "argmax_path": argmax.map(|p| p.label()),
            "path_energies": coeffs.paths.iter().map(|p| (p.label(), p.energy)).collect::<BTreeMap<_, _>>(),
            "warnings": coeffs.warnings,
        }),
    )
}

fn write_dataset(w: &mut dyn Write, trajs: &[Trajectory]) -> std::io::Result<()> {
    writeln!(w, "trajectory,tau,q,p")?;
    for (i, t) in trajs.iter().enumerate() {
        for s in &t.samples {
            writeln!(w, "{i},{},{},{}", fmt_f64(s.tau), fmt_f64(s.q), fmt_f64(s.p))?;
        }
    }
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Vec<Trajectory>, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("trajectory,tau,q,p") {
        return Err(CliError::Config(format!(
            "{}: expected header `trajectory,tau,q,p`",
            path.display()
        )));
    }
    let mut groups: BTreeMap<usize, Vec<PhaseState>> = BTreeMap::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || CliError::Config(format!("{}: row {} is malformed", path.display(), n + 2));
        if f.len() != 4 {
            return Err(bad());
        }
        let id: usize = f[0].parse().map_err(|_| bad())?;
        let v: Vec<f64> = f[1..]
            .iter()
            .map(|x| x.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        groups.entry(id).or_default().push(PhaseState::new(v[1], v[2], v[0]));
    }
    groups
        .into_values()
        .map(|samples| {
            if samples.len() < 2 {
                return Err(CliError::Config("every trajectory needs at least two samples".into()));
            }
            let dt = samples[1].tau - samples[0].tau;
            Ok(Trajectory {
                samples,
                dt,
                output_stride: 1,
                model_id: "pendulum".into(),
                seed: 0,
            })
        })
        .collect()
}

fn training_data(cfg: &RunConfig) -> Result<Vec<Trajectory>, CliError> {
    match &cfg.rom.data {
        Some(path) => read_dataset(path),
        None => Ok(pendulum_dataset(&cfg.rom.dataset)?),
    }
}

#[derive(Serialize)]
struct TrainDiagnostics {
    n_trajectories: usize,
    n_pairs: usize,
    n_params: usize,
    final_loss_recon: f64,
    final_loss_pred: f64,
    moving_average_monotone: bool,
    held_out: xpoint_core::rom::RomEvaluation,
}

pub fn rom_dataset(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let train = pendulum_dataset(&cfg.rom.dataset)?;
    let held = pendulum_dataset(&cfg.rom.held_out)?;
    out.text("dataset.csv", |w| write_dataset(w, &train))?;
    out.text("held_out.csv", |w| write_dataset(w, &held))
}

pub fn rom_train(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let trajs = training_data(cfg)?;
    let held = pendulum_dataset(&cfg.rom.held_out)?;
    let tc = &cfg.rom.train;
    let pairs = make_pairs(&trajs, &tc.taus)?;
    let scale = phase_space_scale(&trajs);
    let epochs = tc.epochs;
    let result = rom_train_with(&pairs, tc, |e| {
        if (e.epoch + 1) % 100 == 0 || e.epoch + 1 == epochs {
            eprintln!(
                "epoch {:>5}  recon {:.3e}  pred {:.3e}",
                e.epoch + 1,
                e.loss_recon,
                e.loss_pred
            );
        }
    });
    let outcome = match result {
        Ok(o) => o,
        Err(Error::TrainingDiverged { epoch, loss, history }) => {
            out.text("history.csv", |w| write_history_csv(&history, w))?;
            return Err(Error::TrainingDiverged { epoch, loss, history }.into());
        }
        Err(e) => return Err(e.into()),
    };
    out.text("history.csv", |w| write_history_csv(&outcome.history, w))?;
    save_params(&outcome.params, &out.path("rom"), Some(scale))?;
    out.record("rom.bin");
    out.record("rom.json");
    let last = outcome.history.last().expect("epochs > 0");
    let diag = TrainDiagnostics {
        n_trajectories: trajs.len(),
        n_pairs: pairs.len(),
        n_params: outcome.params.n_params(),
        final_loss_recon: last.loss_recon,
        final_loss_pred: last.loss_pred,
        moving_average_monotone: moving_average_monotone(&outcome.history, 50),
        held_out: evaluate_rom(&outcome.params, &held, scale)?,
    };
    out.json("diagnostics.json", &diag)
}

pub fn rom_predict(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let prefix = cfg
        .rom
        .params
        .as_ref()
        .ok_or_else(|| CliError::Config("rom.params (parameter file prefix) is required".into()))?;
    let (params, _) = load_params(prefix)?;
    let states: Vec<PhaseState> = match &cfg.rom.predict_input {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Trajectory::read_csv(&text, "pendulum", cfg.seed)?.samples
        }
        None => pendulum_dataset(&cfg.rom.held_out)?
            .into_iter()
            .flat_map(|t| t.samples)
            .collect(),
    };
    let preds = rom_predict_many(&params, &states, cfg.rom.predict_tau);
    out.text("predict.csv", |w| {
        writeln!(w, "tau,q,p,q_pred,p_pred")?;
        for (s, o) in states.iter().zip(&preds) {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(s.tau),
                fmt_f64(s.q),
                fmt_f64(s.p),
                fmt_f64(o.q),
                fmt_f64(o.p)
            )?;
        }
        Ok(())
    })
}

pub fn rom_grad_check(cfg: &mut RunConfig, out: &mut Outputs) -> Run {
    let r = &cfg.rom;
    let params = rom_init(&RomSizes::with_hidden(r.grad_check_hidden), cfg.seed)?;
    let pairs = make_pairs(&training_data(cfg)?, &r.train.taus)?;
    let k = r.grad_check_batch;
    if k == 0 || k > 8 {
        return Err(CliError::Config("rom.grad_check_batch must be in 1..=8".into()));
    }
    // evenly spread over the data so the batch mixes trajectories and offsets
    let batch: Vec<_> = (0..k).map(|i| pairs[(2 * i + 1) * pairs.len() / (2 * k)]).collect();
    let report = grad_check(&params, &batch, r.train.w_r, r.train.w_p, cfg.seed)?;
    println!("max relative error: {:e}", report.max_rel_error);
    out.json("gradcheck.json", &report)
}
