use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Equilibrium, EquilibriumKind};
use crate::error::{invalid, Error, Result};
use crate::models::ModelSpec;
use crate::quadrature::{bisect, integrate};

const QUAD_TOL: f64 = 1e-13;

/// Action-angle data of the closed orbit at one energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub energy: f64,
    /// `J = (1/2 pi) oint p dq`
    pub action: f64,
    /// `2 pi / period`, from turning-point quadrature.
    pub omega_q: f64,
    pub period: f64,
    /// `dE/dJ` from a finite difference of the action.
    pub omega_q_fd: f64,
    pub turning_points: (f64, f64),
}

fn potential(model: &dyn ModelSpec, q: f64) -> Result<f64> {
    model.potential(q, 0.0).ok_or(Error::ModelStructure(
        model.id().to_string(),
        "orbit quadrature needs H = p^2/2 + V(q)",
    ))
}

/// Walks from `center` in direction `dir` until `V >= energy`, then bisects.
fn turning_point(model: &dyn ModelSpec, energy: f64, center: f64, dir: f64) -> Result<f64> {
    let v = |q: f64| model.potential(q, 0.0).expect("checked separable");
    let f = |q: f64| v(q) - energy;
    let no_orbit = |reason: &str| Error::NoClosedOrbit {
        energy,
        reason: reason.to_string(),
    };
    let step = 1e-3;
    let max_dist = 50.0;
    let mut prev = center;
    let mut v_prev = v(prev);
    let mut n = 1;
    while (n as f64) * step <= max_dist {
        let q = center + dir * n as f64 * step;
        let vq = v(q);
        if vq >= energy {
            return bisect(f, prev, q, 1e-15 * (1.0 + q.abs())).ok_or_else(|| no_orbit("bracket lost"));
        }
        if vq < v_prev {
            // passed a local maximum of V between prev - step and q; locate it
            let (mut lo, mut hi) = (prev - dir * step, q);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            let gr = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..100 {
                let a = hi - gr * (hi - lo);
                let b = lo + gr * (hi - lo);
                if v(a) > v(b) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            let q_max = 0.5 * (lo + hi);
            if v(q_max) >= energy {
                // prev may already lie past the barrier; bracket from the centre side
                let inner = if n >= 2 { prev - dir * step } else { center };
                return bisect(f, inner, q_max, 1e-15 * (1.0 + q_max.abs())).ok_or_else(|| no_orbit("bracket lost"));
            }
            return Err(no_orbit("energy exceeds the potential barrier"));
        }
        prev = q;
        v_prev = vq;
        n += 1;
    }
    Err(no_orbit("no turning point within search range"))
}

/// Turning points `(q_left, q_right)` of the orbit of energy `energy` around
/// the well containing `center`.
pub fn turning_points(model: &dyn ModelSpec, energy: f64, center: f64) -> Result<(f64, f64)> {
    let v0 = potential(model, center)?;
    if !(energy > v0) {
        return Err(Error::NoClosedOrbit {
            energy,
            reason: format!("energy is not above the well bottom V={v0}"),
        });
    }
    Ok((
        turning_point(model, energy, center, -1.0)?,
        turning_point(model, energy, center, 1.0)?,
    ))
}

/// Integrates `g(q, E - V(q))` over `[q1, q2]` with `q = turning +- u^2` on each
/// half, which removes the square-root endpoint singularities.
fn orbit_integral<G>(model: &dyn ModelSpec, energy: f64, q1: f64, q2: f64, g: G) -> f64
where
    G: Fn(f64, f64, f64) -> f64,
{
    let v = |q: f64| model.potential(q, 0.0).expect("checked separable");
    let mid = 0.5 * (q1 + q2);
    let half = |turn: f64, sign: f64| {
        let umax = (mid - turn).abs().sqrt();
        // measure depth from V(turn) so it vanishes exactly at u = 0;
        // E - V(turn) is only zero to bisection accuracy
        let v_turn = v(turn);
        debug_assert!((v_turn - energy).abs() < 1e-12 * (1.0 + energy.abs()));
        let (d1, d2) = (model.dh_dq(turn, 0.0, 0.0), model.hessian(turn, 0.0, 0.0)[0][0]);
        let scale = (mid - turn).abs();
        integrate(
            |u: f64| {
                let s = u * u;
                let q = turn + sign * s;
                // Taylor form very close to the turning point, where the
                // difference of potentials loses its digits
                let depth = if s < 1e-5 * scale {
                    -(d1 * sign * s + 0.5 * d2 * s * s)
                } else {
                    v_turn - v(q)
                };
                g(u, depth, model.dh_dq(turn, 0.0, 0.0).abs())
            },
            0.0,
            umax,
            QUAD_TOL,
            QUAD_TOL,
        )
    };
    half(q1, 1.0) + half(q2, -1.0)
}

fn action_between(model: &dyn ModelSpec, energy: f64, q1: f64, q2: f64) -> f64 {
    // J = (1/pi) int p dq, dq = 2u du
    orbit_integral(model, energy, q1, q2, |u, depth, _| {
        2.0 * u * (2.0 * depth.max(0.0)).sqrt()
    }) / PI
}

fn period_between(model: &dyn ModelSpec, energy: f64, q1: f64, q2: f64) -> f64 {
    // T = 2 int dq / p
    2.0 * orbit_integral(model, energy, q1, q2, |u, depth, slope| {
        if depth > 0.0 && u > 0.0 {
            2.0 * u / (2.0 * depth).sqrt()
        } else {
            // u -> 0 limit: depth ~ |V'(turn)| u^2
            2.0 / (2.0 * slope).sqrt()
        }
    })
}

/// Action of the orbit of energy `energy` in the well around `center`.
pub fn action(model: &dyn ModelSpec, energy: f64, center: f64) -> Result<f64> {
    let (q1, q2) = turning_points(model, energy, center)?;
    Ok(action_between(model, energy, q1, q2))
}

/// `dJ/dE` by central differences with step halving until two successive
/// estimates agree.
fn action_slope(model: &dyn ModelSpec, energy: f64, center: f64, bottom: f64) -> Result<f64> {
    let mut h = 1e-3 * (energy - bottom);
    let mut prev: Option<f64> = None;
    for _ in 0..40 {
        let est = match (action(model, energy + h, center), action(model, energy - h, center)) {
            (Ok(jp), Ok(jm)) => Some((jp - jm) / (2.0 * h)),
            _ => None,
        };
        if let (Some(e), Some(p)) = (est, prev) {
            if (e - p).abs() <= 1e-6 * e.abs() {
                return Ok(e);
            }
        }
        if est.is_some() {
            prev = est;
        }
        h *= 0.5;
        if h < 1e-9 {
            break;
        }
    }
    prev.ok_or(Error::NoClosedOrbit {
        energy,
        reason: "action not differentiable here".into(),
    })
}

/// Action, period and frequency of the closed orbit at `energy` in the well
/// centred on `center` (the o-point coordinate).
///
/// The frequency is computed twice: from the period, and as `dE/dJ`.
pub fn orbit_summary(model: &dyn ModelSpec, energy: f64, center: f64) -> Result<OrbitSummary> {
    let (q1, q2) = turning_points(model, energy, center)?;
    let action = action_between(model, energy, q1, q2);
    let period = period_between(model, energy, q1, q2);
    let bottom = potential(model, center)?;
    let omega_q_fd = 1.0 / action_slope(model, energy, center, bottom)?;
    Ok(OrbitSummary {
        energy,
        action,
        omega_q: 2.0 * PI / period,
        period,
        omega_q_fd,
        turning_points: (q1, q2),
    })
}

/// Orbit frequencies at `E_s - eps` for each `eps`, approaching the
/// separatrix of `xp` from inside the well of `o_point`.
pub fn omega_at_separatrix(
    model: &dyn ModelSpec,
    xp: &Equilibrium,
    o_point: &Equilibrium,
    eps_list: &[f64],
) -> Result<Vec<OrbitSummary>> {
    if xp.kind != EquilibriumKind::XPoint {
        return Err(Error::NoXPoint(format!("({}, {}) is an o-point", xp.q, xp.p)));
    }
    let depth = xp.energy - o_point.energy;
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps < depth) {
                return Err(invalid(format!("eps must lie in (0, {depth}), got {eps}")));
            }
            orbit_summary(model, xp.energy - eps, o_point.q)
        })
        .collect()
}

/// Least-squares line `y = slope x + intercept` with coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LogFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Self {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let slope = sxy / sxx;
        let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
        Self {
            slope,
            intercept: my - slope * mx,
            r_squared,
        }
    }
}

/// Fits period against `ln(1/eps)`.
pub fn period_log_fit(eps: &[f64], table: &[OrbitSummary]) -> LogFit {
    let x: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
    let y: Vec<f64> = table.iter().map(|o| o.period).collect();
    LogFit::fit(&x, &y)
}

/// `m_Q = omega_Q^-2`; infinite at `omega_Q = 0`.
pub fn effective_mass(omega_q: f64) -> Result<f64> {
    if omega_q < 0.0 || omega_q.is_nan() {
        return Err(invalid(format!("frequency must be >= 0, got {omega_q}")));
    }
    if omega_q == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(omega_q.powi(-2))
}
