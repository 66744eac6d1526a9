use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::distance;
use super::{
    discounted_value, dwell_time, plan_stimulus, ControlPolicy, Metric, Reward, StimulusOptions, StimulusPlan,
};
use crate::dynamics::{integrate, IntegratorConfig, PhaseState, Scheme, Trajectory};
use crate::equilibria::{classify, EquilibriumKind, SeparatrixInfo};
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::models::ModelSpec;

/// Stimulate-then-dwell experiment: lift `s0` to `E_s - delta`, then let
/// it evolve under damping `nu` for `horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellScenario {
    pub s0: PhaseState,
    /// Location of the target x-point on `p = 0`.
    pub xpoint_q: f64,
    pub delta: f64,
    pub stimulus: StimulusOptions,
    pub horizon: f64,
    pub dt: f64,
    pub radius: f64,
    pub metric: Metric,
    pub reward: Reward,
}

impl DwellScenario {
    /// Double well lifted from the right-hand basin bottom, with reward
    /// concentrated at the x-point.
    pub fn double_well_demo() -> Self {
        Self {
            s0: PhaseState::new(1.0, 0.0, 0.0),
            xpoint_q: 0.0,
            delta: 1e-3,
            stimulus: StimulusOptions::default(),
            horizon: 200.0,
            dt: 1e-2,
            radius: 0.3,
            metric: Metric::Linearized,
            reward: Reward::Gaussian {
                center: 0.0,
                width: 0.2,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViscosityRow {
    pub nu: f64,
    /// Longest contiguous stay near the x-point.
    pub dwell_time: f64,
    #[serde(rename = "V")]
    pub value: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViscosityScan {
    pub rows: Vec<ViscosityRow>,
    pub plan: StimulusPlan,
    /// `1 / lambda` of the target x-point.
    pub efolding_time: f64,
    /// Smallest `nu` with dwell below one e-folding time.
    pub critical_nu: Option<f64>,
}

impl ViscosityScan {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nu,dwell_time,V,ratio")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(r.nu),
                fmt_f64(r.dwell_time),
                fmt_f64(r.value),
                fmt_f64(r.ratio)
            )?;
        }
        Ok(())
    }

    pub fn dwell_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].dwell_time <= w[0].dwell_time)
    }

    pub fn value_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].value <= w[0].value)
    }
}

/// Runs `scenario` once per damping rate. Dwell is the longest stay that
/// begins after the stimulus ends. Ratios are relative to the first grid
/// entry. Runs are independent and merged in grid order.
pub fn viscosity_scan(model: &dyn ModelSpec, nu_grid: &[f64], scenario: &DwellScenario) -> Result<ViscosityScan> {
    if nu_grid.is_empty() {
        return Err(invalid("empty viscosity grid"));
    }
    if nu_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("viscosity grid must be sorted ascending"));
    }
    if let Some(nu) = nu_grid.iter().find(|nu| !(**nu >= 0.0 && nu.is_finite())) {
        return Err(invalid(format!("viscosity must be >= 0, got {nu}")));
    }
    if !(scenario.horizon > 0.0 && scenario.dt > 0.0) {
        return Err(invalid("horizon and dt must be positive"));
    }
    let xp = classify(model, scenario.xpoint_q, 0.0);
    if xp.kind != EquilibriumKind::XPoint || model.dh_dq(xp.q, 0.0, 0.0).abs() > 1e-10 {
        return Err(Error::NoXPoint(format!(
            "no x-point of {} at q={}",
            model.id(),
            scenario.xpoint_q
        )));
    }
    let lambda = xp.growth_rate().unwrap_or(f64::INFINITY);
    let sep = SeparatrixInfo {
        xpoint: xp.clone(),
        energy: xp.energy,
        branches: vec![],
    };
    let plan = plan_stimulus(model, scenario.s0, &sep, scenario.delta, &scenario.stimulus)?;
    let n_steps = (scenario.horizon / scenario.dt).round() as usize;
    let cfg = IntegratorConfig::new(scenario.horizon / n_steps as f64, n_steps, 1, Scheme::Rk4);

    let runs = nu_grid
        .par_iter()
        .map(|&nu| -> Result<(f64, f64, f64)> {
            let start = PhaseState {
                tau: 0.0,
                ..plan.final_state
            };
            let traj = integrate(model, start, &cfg, Some(&ControlPolicy::Viscous { nu }))?;
            // a visit already under way when the ramp ends is not counted
            let first_out = traj
                .samples
                .iter()
                .position(|s| distance(&xp, scenario.metric, s.q, s.p) >= scenario.radius)
                .unwrap_or(traj.samples.len() - 1);
            let after = Trajectory {
                samples: traj.samples[first_out..].to_vec(),
                ..traj.clone()
            };
            let dwell = dwell_time(&after, &xp, scenario.radius, scenario.metric)?;
            let value = discounted_value(&traj, |q| scenario.reward.eval(q), nu)?;
            Ok((nu, dwell.longest_visit, value.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let baseline = runs[0].2;
    let rows: Vec<ViscosityRow> = runs
        .into_iter()
        .map(|(nu, dwell_time, value)| ViscosityRow {
            nu,
            dwell_time,
            value,
            ratio: if baseline == 0.0 { 0.0 } else { value / baseline },
        })
        .collect();
    let efolding_time = 1.0 / lambda;
    let critical_nu = rows.iter().find(|r| r.dwell_time < efolding_time).map(|r| r.nu);
    Ok(ViscosityScan {
        rows,
        plan,
        efolding_time,
        critical_nu,
    })
}
