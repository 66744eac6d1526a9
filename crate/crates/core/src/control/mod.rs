//! Control of conservative systems: viscous damping, stimulation to just
//! below the separatrix, and ponderomotive (fast-drive) stabilization of
//! x-points, together with dwell-time and discounted-value metrics.

mod metrics;
mod ponderomotive;
mod stimulus;
mod viscosity;

pub use metrics::{discounted_value, dwell_time, DwellReport, Metric, Reward, ValueReport};
pub use ponderomotive::{
    effective_potential, kapitza_threshold_scan, run_ponderomotive, EffectivePotential, PonderomotiveOptions,
    PonderomotiveReport, ThresholdRow, ThresholdScan,
};
pub use stimulus::{plan_stimulus, well_bottom, StimulusOptions, StimulusPlan};
pub use viscosity::{viscosity_scan, DwellScenario, ViscosityRow, ViscosityScan};

use serde::{Deserialize, Serialize};

use crate::dynamics::Forcing;
use crate::error::{invalid, Result};
use crate::models::ModelSpec;

/// One control strategy. Several can act at once through [`PolicySet`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlPolicy {
    /// Linear damping `-nu p`.
    Viscous { nu: f64 },
    /// Half-sine force ramp along the direction of motion over
    /// `[start, start + ramp_time]`.
    Stimulus { amplitude: f64, ramp_time: f64, start: f64 },
    /// Vertical pivot vibration of amplitude `a`: modulates the potential
    /// force by `a omega^2 cos(omega tau)`.
    Ponderomotive { a: f64, omega: f64 },
}

impl ControlPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ControlPolicy::Viscous { nu } if !(nu >= 0.0 && nu.is_finite()) => {
                Err(invalid(format!("viscosity must be >= 0, got {nu}")))
            }
            ControlPolicy::Stimulus {
                amplitude, ramp_time, ..
            } if !(amplitude.is_finite() && ramp_time > 0.0 && ramp_time.is_finite()) => {
                Err(invalid("stimulus needs a finite amplitude and positive ramp time"))
            }
            ControlPolicy::Ponderomotive { a, omega } if !(a >= 0.0 && omega > 0.0 && omega.is_finite()) => {
                Err(invalid(format!(
                    "ponderomotive drive needs a >= 0 and omega > 0, got a={a}, omega={omega}"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl Forcing for ControlPolicy {
    fn force(&self, model: &dyn ModelSpec, q: f64, p: f64, tau: f64) -> f64 {
        match *self {
            ControlPolicy::Viscous { nu } => -nu * p,
            ControlPolicy::Stimulus {
                amplitude,
                ramp_time,
                start,
            } => {
                let t = tau - start;
                if !(0.0..=ramp_time).contains(&t) {
                    return 0.0;
                }
                let envelope = (std::f64::consts::PI * t / ramp_time).sin();
                // from rest the push goes toward +q
                let direction = if p >= 0.0 { 1.0 } else { -1.0 };
                amplitude * envelope * direction
            }
            ControlPolicy::Ponderomotive { a, omega } => {
                a * omega * omega * (omega * tau).cos() * model.dh_dq(q, 0.0, tau)
            }
        }
    }

    fn velocity_dependent(&self) -> bool {
        !matches!(self, ControlPolicy::Ponderomotive { .. })
    }
}

/// Policies acting together; forces add.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicySet(pub Vec<ControlPolicy>);

impl Forcing for PolicySet {
    fn force(&self, model: &dyn ModelSpec, q: f64, p: f64, tau: f64) -> f64 {
        self.0.iter().map(|c| c.force(model, q, p, tau)).sum()
    }

    fn velocity_dependent(&self) -> bool {
        self.0.iter().any(Forcing::velocity_dependent)
    }
}
