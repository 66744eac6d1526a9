use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::equilibria::{Equilibrium, EquilibriumKind};
use crate::error::{invalid, Result};

/// Phase-space distance used for dwell measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// Coordinates along the x-point's unit eigenvectors.
    Linearized,
}

/// Time spent near an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellReport {
    pub xpoint: (f64, f64),
    pub radius: f64,
    /// Total time inside `radius`.
    pub dwell_time: f64,
    /// Longest single contiguous stay inside `radius`.
    pub longest_visit: f64,
    pub visits: usize,
    /// Set when, after first entering `radius`, the trajectory reaches `2 radius`.
    pub escaped: bool,
}

pub(crate) fn distance(xp: &Equilibrium, metric: Metric, q: f64, p: f64) -> f64 {
    let (dq, dp) = (q - xp.q, p - xp.p);
    match (metric, xp.kind, xp.eigenvectors) {
        (Metric::Linearized, EquilibriumKind::XPoint, Some([u, s])) => {
            // solve a u + b s = d
            let det = u[0] * s[1] - u[1] * s[0];
            let a = (dq * s[1] - dp * s[0]) / det;
            let b = (u[0] * dp - u[1] * dq) / det;
            a.hypot(b)
        }
        _ => dq.hypot(dp),
    }
}

/// Dwell statistics of `traj` within `radius` of `xp`.
///
/// Partial sample intervals are apportioned by linear interpolation of the
/// distance, so a trajectory pinned at `xp` dwells for its full duration.
pub fn dwell_time(traj: &Trajectory, xp: &Equilibrium, radius: f64, metric: Metric) -> Result<DwellReport> {
    if !(radius > 0.0) {
        return Err(invalid(format!("dwell radius must be positive, got {radius}")));
    }
    let d: Vec<f64> = traj.samples.iter().map(|s| distance(xp, metric, s.q, s.p)).collect();
    let mut total = 0.0;
    let mut current = 0.0;
    let mut longest: f64 = 0.0;
    let mut visits = usize::from(d[0] < radius);
    let mut entered = d[0] < radius;
    let mut escaped = false;
    for (w, pair) in d.windows(2).zip(traj.samples.windows(2)) {
        let (d0, d1) = (w[0], w[1]);
        let dt = pair[1].tau - pair[0].tau;
        let inside = match (d0 < radius, d1 < radius) {
            (true, true) => dt,
            (true, false) => dt * (radius - d0) / (d1 - d0),
            (false, true) => dt * (radius - d1) / (d0 - d1),
            (false, false) => 0.0,
        };
        if d0 >= radius && d1 < radius {
            visits += 1;
            current = 0.0;
        }
        current += inside;
        total += inside;
        longest = longest.max(current);
        if d1 >= radius {
            current = 0.0;
        }
        entered |= d1 < radius;
        if entered && d1 > 2.0 * radius {
            escaped = true;
        }
    }
    Ok(DwellReport {
        xpoint: (xp.q, xp.p),
        radius,
        dwell_time: total,
        longest_visit: longest,
        visits,
        escaped,
    })
}

/// Non-negative reward `R(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reward {
    Constant {
        value: f64,
    },
    /// `exp(-(q - center)^2 / (2 width^2))`
    Gaussian {
        center: f64,
        width: f64,
    },
    /// `q^2`
    Quadratic,
    /// 1 for `q > threshold`, else 0.
    Step {
        threshold: f64,
    },
}

impl Reward {
    pub fn eval(&self, q: f64) -> f64 {
        match *self {
            Reward::Constant { value } => value,
            Reward::Gaussian { center, width } => (-(q - center).powi(2) / (2.0 * width * width)).exp(),
            Reward::Quadratic => q * q,
            Reward::Step { threshold } => f64::from(u8::from(q > threshold)),
        }
    }
}

/// Discounted value of a trajectory and its ratio to a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueReport {
    pub nu: f64,
    pub value: f64,
    pub horizon: f64,
    pub baseline_value: Option<f64>,
    pub ratio: Option<f64>,
}

impl ValueReport {
    pub fn with_baseline(mut self, baseline: f64) -> Self {
        self.baseline_value = Some(baseline);
        self.ratio = Some(if baseline == 0.0 { 0.0 } else { self.value / baseline });
        self
    }
}

/// `V = int exp(-nu tau) R(q(tau)) dtau` by the trapezoidal rule, with `tau`
/// measured from the first sample.
pub fn discounted_value(traj: &Trajectory, reward: impl Fn(f64) -> f64, nu: f64) -> Result<ValueReport> {
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(invalid(format!("discount rate must be >= 0, got {nu}")));
    }
    let t0 = traj.samples[0].tau;
    let f = |i: usize| {
        let s = &traj.samples[i];
        (-nu * (s.tau - t0)).exp() * reward(s.q)
    };
    let mut value = 0.0;
    for i in 1..traj.samples.len() {
        let dt = traj.samples[i].tau - traj.samples[i - 1].tau;
        value += 0.5 * dt * (f(i - 1) + f(i));
    }
    Ok(ValueReport {
        nu,
        value,
        horizon: traj.duration(),
        baseline_value: None,
        ratio: None,
    })
}
