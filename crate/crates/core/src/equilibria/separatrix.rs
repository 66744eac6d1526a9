use serde::{Deserialize, Serialize};

use super::{Equilibrium, EquilibriumKind, Rect};
use crate::error::{invalid, Error, Result};
use crate::models::ModelSpec;

/// Offset from the x-point along each eigenvector where tracing starts.
const SEED_OFFSET: f64 = 1e-6;

/// The separatrix through one x-point: four manifold branches
/// (unstable +, unstable -, stable +, stable -), each a `(q, p)` polyline
/// starting at the x-point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixInfo {
    pub xpoint: Equilibrium,
    pub energy: f64,
    pub branches: Vec<Vec<(f64, f64)>>,
}

impl SeparatrixInfo {
    /// Largest `|H - E_s|` over all branch vertices.
    pub fn max_energy_error(&self, model: &dyn ModelSpec) -> f64 {
        self.branches
            .iter()
            .flatten()
            .map(|&(q, p)| (model.hamiltonian(q, p, 0.0) - self.energy).abs())
            .fold(0.0, f64::max)
    }

    /// Writes all branches as CSV `branch,q,p`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        use crate::io::fmt_f64;
        writeln!(w, "branch,q,p")?;
        for (i, b) in self.branches.iter().enumerate() {
            for &(q, p) in b {
                writeln!(w, "{i},{},{}", fmt_f64(q), fmt_f64(p))?;
            }
        }
        Ok(())
    }
}

/// Traces the stable and unstable manifolds of `xp` with an arclength-
/// parametrised RK4 of step `ds`, until a branch leaves `bounds`, closes
/// back onto an x-point, or exceeds `max_length`.
pub fn trace_separatrix(
    model: &dyn ModelSpec,
    xp: &Equilibrium,
    ds: f64,
    bounds: Rect,
    max_length: f64,
) -> Result<SeparatrixInfo> {
    if xp.kind != EquilibriumKind::XPoint {
        return Err(Error::NoXPoint(format!("({}, {}) is not an x-point", xp.q, xp.p)));
    }
    if !(ds > 0.0 && ds.is_finite()) {
        return Err(invalid(format!("ds must be positive, got {ds}")));
    }
    let [unstable, stable] = xp
        .eigenvectors
        .ok_or_else(|| Error::NoXPoint("x-point lacks eigenvectors".into()))?;
    let lambda = xp.growth_rate().unwrap_or(1.0);
    let mut branches = Vec::with_capacity(4);
    for (dir, time_sign) in [(unstable, 1.0), (stable, -1.0)] {
        for side in [1.0, -1.0] {
            let start = (xp.q + side * SEED_OFFSET * dir[0], xp.p + side * SEED_OFFSET * dir[1]);
            branches.push(trace_branch(
                model, xp, start, time_sign, ds, bounds, max_length, lambda,
            ));
        }
    }
    Ok(SeparatrixInfo {
        xpoint: xp.clone(),
        energy: xp.energy,
        branches,
    })
}

#[allow(clippy::too_many_arguments)]
fn trace_branch(
    model: &dyn ModelSpec,
    xp: &Equilibrium,
    start: (f64, f64),
    time_sign: f64,
    ds: f64,
    bounds: Rect,
    max_length: f64,
    lambda: f64,
) -> Vec<(f64, f64)> {
    let field = |q: f64, p: f64| {
        let (vq, vp) = (model.dh_dp(q, p, 0.0), -model.dh_dq(q, p, 0.0));
        let n = vq.hypot(vp);
        if n == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            (time_sign * vq / n, time_sign * vp / n, n)
        }
    };
    let mut pts = vec![(xp.q, xp.p), start];
    let (mut q, mut p) = start;
    let mut length = 0.0;
    // the flow speed near any saddle is ~ lambda * distance
    let stop_speed = 5.0 * lambda * ds;
    while length < max_length {
        let (k1q, k1p, _) = field(q, p);
        let (k2q, k2p, _) = field(q + 0.5 * ds * k1q, p + 0.5 * ds * k1p);
        let (k3q, k3p, _) = field(q + 0.5 * ds * k2q, p + 0.5 * ds * k2p);
        let (k4q, k4p, _) = field(q + ds * k3q, p + ds * k3p);
        q += ds / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        p += ds / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        length += ds;
        if !bounds.contains(q, p, 0.0) {
            break;
        }
        pts.push((q, p));
        let speed = field(q, p).2;
        if length > 10.0 * ds && speed < stop_speed {
            break;
        }
    }
    pts
}
