use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Pair;
use crate::dynamics::{integrate, IntegratorConfig, PhaseState, Scheme, Trajectory};
use crate::error::{invalid, Result};
use crate::models::Pendulum;

/// Pendulum librations with energies drawn uniformly from
/// `[e_min, e_max]` and uniformly random starting phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_trajectories: usize,
    pub e_min: f64,
    pub e_max: f64,
    pub sample_dt: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_trajectories: 200,
            e_min: -0.99,
            e_max: -0.5,
            sample_dt: 0.25,
            n_samples: 65,
            seed: 1,
        }
    }
}

const STEPS_PER_SAMPLE: usize = 250;

pub fn pendulum_dataset(cfg: &DatasetConfig) -> Result<Vec<Trajectory>> {
    if !(cfg.e_min > -1.0 && cfg.e_max < 1.0 && cfg.e_min <= cfg.e_max) {
        return Err(invalid("energies must lie inside the pendulum well (-1, 1)"));
    }
    if cfg.n_trajectories == 0 || cfg.n_samples < 2 || !(cfg.sample_dt > 0.0) {
        return Err(invalid(
            "dataset needs trajectories, >= 2 samples and a positive sample interval",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dt = cfg.sample_dt / STEPS_PER_SAMPLE as f64;
    (0..cfg.n_trajectories)
        .map(|_| {
            let e = cfg.e_min + (cfg.e_max - cfg.e_min) * rng.random::<f64>();
            // start at the right turning point, then skip a random part of a period
            let skip = (rng.random::<f64>() * 7.0 / dt) as usize;
            let start = PhaseState::new((-e).acos(), 0.0, 0.0);
            let s0 = if skip > 0 {
                integrate(
                    &Pendulum,
                    start,
                    &IntegratorConfig::new(dt, skip, skip, Scheme::Leapfrog),
                    None,
                )?
                .last()
            } else {
                start
            };
            let s0 = PhaseState { tau: 0.0, ..s0 };
            let cfg_run = IntegratorConfig::new(
                dt,
                (cfg.n_samples - 1) * STEPS_PER_SAMPLE,
                STEPS_PER_SAMPLE,
                Scheme::Leapfrog,
            );
            let mut t = integrate(&Pendulum, s0, &cfg_run, None)?;
            t.seed = cfg.seed;
            Ok(t)
        })
        .collect()
}

/// All `(s_t, s_{t + tau})` pairs; every offset must be a whole number of
/// sample intervals.
pub fn make_pairs(trajectories: &[Trajectory], taus: &[f64]) -> Result<Vec<Pair>> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("offsets must be positive and non-empty"));
    }
    let mut out = Vec::new();
    for t in trajectories {
        let h = t.sample_interval();
        for &tau in taus {
            let k = (tau / h).round();
            if (k * h - tau).abs() > 1e-9 * tau {
                return Err(invalid(format!(
                    "offset {tau} is not a multiple of the sample interval {h}"
                )));
            }
            let k = k as usize;
            for i in 0..t.samples.len().saturating_sub(k) {
                let (a, b) = (t.samples[i], t.samples[i + k]);
                out.push(Pair {
                    s: [a.q, a.p],
                    target: [b.q, b.p],
                    tau,
                });
            }
        }
    }
    if out.is_empty() {
        return Err(invalid("trajectories are too short for the requested offsets"));
    }
    Ok(out)
}

/// Largest phase-space radius `sqrt(q^2 + p^2)` in the data.
pub fn phase_space_scale(trajectories: &[Trajectory]) -> f64 {
    trajectories
        .iter()
        .flat_map(|t| &t.samples)
        .map(|s| s.q.hypot(s.p))
        .fold(0.0, f64::max)
}
