use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ControlPolicy;
use crate::dynamics::{energy, integrate, IntegratorConfig, PhaseState, Scheme, Trajectory};
use crate::equilibria::{orbit_summary, SeparatrixInfo};
use crate::error::{invalid, Error, Result};
use crate::models::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimulusOptions {
    pub ramp_time: f64,
    pub dt: f64,
}

impl Default for StimulusOptions {
    fn default() -> Self {
        Self {
            ramp_time: 40.0,
            dt: 1e-3,
        }
    }
}

/// A calibrated stimulus schedule and its predicted outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusPlan {
    pub policy: ControlPolicy,
    pub target_energy: f64,
    pub final_energy: f64,
    pub final_state: PhaseState,
    /// `sum dE / omega_Q` accumulated along the ramp.
    pub costate_gain: f64,
    /// Action difference `J(E_final) - J(E_initial)` for comparison.
    pub action_gain: f64,
}

/// Coordinate of the bottom of the potential well containing `q0`.
pub fn well_bottom(model: &dyn ModelSpec, q0: f64) -> Result<f64> {
    if model.potential(q0, 0.0).is_none() {
        return Err(Error::ModelStructure(model.id().to_string(), "needs H = p^2/2 + V(q)"));
    }
    let mut q = q0;
    // gradient descent, then Newton polish
    for _ in 0..100_000 {
        let g = model.dh_dq(q, 0.0, 0.0);
        if g.abs() < 1e-6 {
            break;
        }
        q -= 0.05 * g.signum() * g.abs().min(1.0);
    }
    for _ in 0..50 {
        let g = model.dh_dq(q, 0.0, 0.0);
        let c = model.hessian(q, 0.0, 0.0)[0][0];
        if c <= 0.0 {
            return Err(invalid(format!("no potential minimum near q={q0}")));
        }
        let step = g / c;
        q -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    Ok(q)
}

fn ramp(model: &dyn ModelSpec, s0: PhaseState, amplitude: f64, opts: &StimulusOptions) -> Result<Trajectory> {
    let policy = ControlPolicy::Stimulus {
        amplitude,
        ramp_time: opts.ramp_time,
        start: s0.tau,
    };
    let n = (opts.ramp_time / opts.dt).ceil() as usize;
    let cfg = IntegratorConfig::new(opts.ramp_time / n as f64, n, 1, Scheme::Rk4);
    integrate(model, s0, &cfg, Some(&policy))
}

/// Calibrates a stimulus ramp that lifts `s0` to energy `E_s - delta`,
/// just below the separatrix.
///
/// The ramp amplitude is found by bisection on the simulated terminal
/// energy, so the returned plan reproduces exactly under
/// [`crate::dynamics::integrate`] with the same step.
pub fn plan_stimulus(
    model: &dyn ModelSpec,
    s0: PhaseState,
    sep: &SeparatrixInfo,
    delta: f64,
    opts: &StimulusOptions,
) -> Result<StimulusPlan> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!(
            "stimulus margin must be > 0 (a zero margin overshoots the x-point), got {delta}"
        )));
    }
    if !(opts.ramp_time > 0.0 && opts.dt > 0.0) {
        return Err(invalid("ramp_time and dt must be positive"));
    }
    let e0 = energy(model, &s0);
    let target = sep.energy - delta;
    if e0 >= sep.energy {
        return Err(invalid(format!(
            "initial energy {e0} is not inside the separatrix E_s={}",
            sep.energy
        )));
    }
    if e0 >= target {
        return Err(invalid(format!(
            "initial energy {e0} is already above the target {target}"
        )));
    }
    let final_energy = |a: f64| -> Result<f64> {
        let t = ramp(model, s0, a, opts)?;
        Ok(energy(model, &t.last()))
    };
    let (mut lo, mut hi) = (0.0, 1e-3);
    let mut hi_energy = final_energy(hi)?;
    let mut doublings = 0;
    while hi_energy < target {
        lo = hi;
        hi *= 2.0;
        hi_energy = final_energy(hi)?;
        doublings += 1;
        if doublings > 60 {
            return Err(invalid("stimulus cannot reach the target energy"));
        }
    }
    let tol = 1e-3 * delta;
    let mut best = (hi, hi_energy);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let e = final_energy(mid)?;
        if (e - target).abs() < (best.1 - target).abs() {
            best = (mid, e);
        }
        if (e - target).abs() < tol || mid == lo || mid == hi {
            break;
        }
        if e < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let amplitude = best.0;
    let traj = ramp(model, s0, amplitude, opts)?;
    let final_state = traj.last();
    let final_energy = energy(model, &final_state);

    let center = well_bottom(model, s0.q)?;
    let costate_gain = accumulate_costate(model, &traj, center, sep.energy)?;
    let j_final = orbit_summary(model, final_energy, center)
        .map(|o| o.action)
        .unwrap_or(f64::NAN);
    let j_initial = if e0 > model.potential(center, 0.0).unwrap_or(e0) {
        orbit_summary(model, e0, center).map(|o| o.action).unwrap_or(0.0)
    } else {
        0.0
    };
    Ok(StimulusPlan {
        policy: ControlPolicy::Stimulus {
            amplitude,
            ramp_time: opts.ramp_time,
            start: s0.tau,
        },
        target_energy: target,
        final_energy,
        final_state,
        costate_gain,
        action_gain: j_final - j_initial,
    })
}

/// `P = int dE / omega_Q`, accumulated over up to 400 energy increments
/// along the ramp with the frequency at each increment's midpoint.
fn accumulate_costate(model: &dyn ModelSpec, traj: &Trajectory, center: f64, e_s: f64) -> Result<f64> {
    let bottom = model.potential(center, 0.0).unwrap_or(f64::NEG_INFINITY);
    let n = traj.samples.len();
    let chunks = 400.min(n - 1).max(1);
    let energies: Vec<f64> = (0..=chunks)
        .map(|k| energy(model, &traj.samples[k * (n - 1) / chunks]))
        .collect();
    let mut gain = 0.0;
    for w in energies.windows(2) {
        let de = w[1] - w[0];
        let mid = 0.5 * (w[0] + w[1]);
        if de == 0.0 || mid <= bottom || mid >= e_s {
            continue;
        }
        let period = orbit_summary(model, mid, center)?.period;
        gain += de * period / (2.0 * PI);
    }
    Ok(gain)
}
