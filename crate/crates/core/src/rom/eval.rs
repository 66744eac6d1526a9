use serde::{Deserialize, Serialize};

use super::{decode, encode, rom_predict_many, RomParams};
use crate::dynamics::{energy, PhaseState, Trajectory};
use crate::equilibria::{orbit_summary, LogFit};
use crate::error::{invalid, Result};
use crate::models::Pendulum;

/// Held-out quality of a pendulum reduced-order model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RomEvaluation {
    /// Largest phase-space radius of the training data; the error unit.
    pub scale: f64,
    /// RMS of `|decode(encode(s)) - s|` over all held-out samples, over `scale`.
    pub recon_rms: f64,
    /// RMS of `|rom_predict(s, T(E)) - s|` with `T(E)` the true period, over `scale`.
    pub period_pred_rms: f64,
    /// Largest per-trajectory coefficient of variation of `P - P(o-point)`.
    pub p_cov_max: f64,
    /// Smallest per-trajectory `R^2` of the unwrapped angle against time.
    pub q_r2_min: f64,
}

fn unwrap(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (i, &a) in angles.iter().enumerate() {
        if i > 0 {
            let d = a - angles[i - 1];
            if d > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
            } else if d < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
            }
        }
        out.push(a + offset);
    }
    out
}

/// Scores `params` on held-out pendulum trajectories.
///
/// `P` is measured from the encoding of the o-point at the origin, which
/// fixes its additive gauge (only `dE/dP` is constrained by training).
pub fn evaluate_rom(params: &RomParams, held_out: &[Trajectory], scale: f64) -> Result<RomEvaluation> {
    if held_out.is_empty() || !(scale > 0.0) {
        return Err(invalid("evaluation needs trajectories and a positive scale"));
    }
    let p0 = encode(params, &[PhaseState::new(0.0, 0.0, 0.0)])[0].p;
    let (mut rec_sq, mut pred_sq, mut count) = (0.0, 0.0, 0usize);
    let mut p_cov_max: f64 = 0.0;
    let mut q_r2_min: f64 = 1.0;
    for t in held_out {
        let latent = encode(params, &t.samples);
        for (s, o) in t.samples.iter().zip(decode(params, &latent)) {
            rec_sq += (o[0] - s.q).powi(2) + (o[1] - s.p).powi(2);
        }
        let period = orbit_summary(&Pendulum, energy(&Pendulum, &t.samples[0]), 0.0)?.period;
        for (s, o) in t.samples.iter().zip(rom_predict_many(params, &t.samples, period)) {
            pred_sq += (o.q - s.q).powi(2) + (o.p - s.p).powi(2);
        }
        count += t.samples.len();

        let ps: Vec<f64> = latent.iter().map(|l| l.p - p0).collect();
        let mean = ps.iter().sum::<f64>() / ps.len() as f64;
        let var = ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / ps.len() as f64;
        p_cov_max = p_cov_max.max(var.sqrt() / mean.abs());

        let angles = unwrap(&latent.iter().map(|l| l.angle()).collect::<Vec<_>>());
        let times: Vec<f64> = t.samples.iter().map(|s| s.tau).collect();
        q_r2_min = q_r2_min.min(LogFit::fit(&times, &angles).r_squared);
    }
    let n = count as f64;
    Ok(RomEvaluation {
        scale,
        recon_rms: (rec_sq / n).sqrt() / scale,
        period_pred_rms: (pred_sq / n).sqrt() / scale,
        p_cov_max,
        q_r2_min,
    })
}
