use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::equilibria::turning_points;
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::models::ModelSpec;
use crate::quadrature::panel;

/// Sign of the momentum `p = dS/dq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }
}

/// Where to build `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Between the turning points of the bound orbit in the well at `center`.
    Well { center: f64 },
    /// A fixed interval that must be classically allowed throughout
    /// (rotations, open orbits).
    Interval { q_min: f64, q_max: f64 },
}

/// `S(q)` on one branch at energy `energy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingFunction {
    pub q_grid: Vec<f64>,
    pub s_values: Vec<f64>,
    /// Exact `p(q)` on the grid.
    pub ds_dq: Vec<f64>,
    pub energy: f64,
    pub branch: Branch,
    /// True when the grid ends on turning points.
    pub bounded: bool,
}

impl GeneratingFunction {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "q,S,dS_dq")?;
        for ((q, s), p) in self.q_grid.iter().zip(&self.s_values).zip(&self.ds_dq) {
            writeln!(w, "{},{},{}", fmt_f64(*q), fmt_f64(*s), fmt_f64(*p))?;
        }
        Ok(())
    }

    /// `S(q_last) - S(q_first)`.
    pub fn span(&self) -> f64 {
        self.s_values[self.s_values.len() - 1] - self.s_values[0]
    }
}

fn momentum(model: &dyn ModelSpec, energy: f64, q: f64, sign: f64) -> f64 {
    let v = model.potential(q, 0.0).expect("checked separable");
    sign * (2.0 * (energy - v)).max(0.0).sqrt()
}

/// Conservative characteristic solution on `region` with `grid_n` nodes.
///
/// Bound orbits use the nodes `q = mid - half cos(theta)`, uniform in
/// `theta`, which cluster at the turning points where `p ~ sqrt(q - q_t)`;
/// `S` is accumulated cell by cell with Gauss-Kronrod quadrature in `theta`,
/// where the integrand is smooth.
pub fn solve_characteristics(
    model: &dyn ModelSpec,
    energy: f64,
    branch: Branch,
    region: Region,
    grid_n: usize,
) -> Result<GeneratingFunction> {
    if grid_n < 5 {
        return Err(invalid("grid_n must be >= 5"));
    }
    if model.potential(0.0, 0.0).is_none() {
        return Err(Error::ModelStructure(
            model.id().to_string(),
            "characteristics need H = p^2/2 + V(q)",
        ));
    }
    let sign = branch.sign();
    let n = grid_n - 1;
    let (q_grid, s_values, bounded) = match region {
        Region::Well { center } => {
            let (q1, q2) = turning_points(model, energy, center).map_err(|e| match e {
                Error::NoClosedOrbit { reason, .. } => {
                    Error::Domain(format!("no allowed region at E={energy}: {reason}"))
                }
                other => other,
            })?;
            let (mid, half) = (0.5 * (q1 + q2), 0.5 * (q2 - q1));
            let q_of = |t: f64| mid - half * t.cos();
            let integrand = |t: f64| momentum(model, energy, q_of(t), sign) * half * t.sin();
            let theta: Vec<f64> = (0..=n).map(|i| PI * i as f64 / n as f64).collect();
            let mut q: Vec<f64> = theta.iter().map(|&t| q_of(t)).collect();
            q[0] = q1;
            q[n] = q2;
            let mut s = vec![0.0; n + 1];
            for i in 0..n {
                s[i + 1] = s[i] + panel(integrand, theta[i], theta[i + 1]);
            }
            (q, s, true)
        }
        Region::Interval { q_min, q_max } => {
            if !(q_max > q_min) {
                return Err(invalid("interval needs q_min < q_max"));
            }
            let q: Vec<f64> = (0..=n).map(|i| q_min + (q_max - q_min) * i as f64 / n as f64).collect();
            if let Some(bad) = q.iter().find(|&&x| model.potential(x, 0.0).unwrap() > energy) {
                return Err(Error::Domain(format!(
                    "E={energy} is forbidden at q={bad} inside the interval"
                )));
            }
            let mut s = vec![0.0; n + 1];
            for i in 0..n {
                s[i + 1] = s[i] + panel(|x| momentum(model, energy, x, sign), q[i], q[i + 1]);
            }
            (q, s, false)
        }
    };
    let ds_dq = q_grid.iter().map(|&x| momentum(model, energy, x, sign)).collect();
    Ok(GeneratingFunction {
        q_grid,
        s_values,
        ds_dq,
        energy,
        branch,
        bounded,
    })
}

/// Max over interior nodes of `|H(S'(q), q) - E|`, with `S'` from the
/// three-point centered difference on the (possibly nonuniform) grid.
/// For bounded solutions the two cells next to each turning point are
/// excluded, where `S'` has a square-root singularity.
pub fn hjb_residual(model: &dyn ModelSpec, s: &GeneratingFunction) -> f64 {
    let n = s.q_grid.len();
    let skip = if s.bounded { 3 } else { 1 };
    let mut worst: f64 = 0.0;
    for i in skip..n.saturating_sub(skip) {
        let (x0, x1, x2) = (s.q_grid[i - 1], s.q_grid[i], s.q_grid[i + 1]);
        let (h0, h1) = (x1 - x0, x2 - x1);
        let (s0, s1, s2) = (s.s_values[i - 1], s.s_values[i], s.s_values[i + 1]);
        let deriv = -h1 / (h0 * (h0 + h1)) * s0 + (h1 - h0) / (h0 * h1) * s1 + h0 / (h1 * (h0 + h1)) * s2;
        worst = worst.max((model.hamiltonian(x1, deriv, 0.0) - s.energy).abs());
    }
    worst
}

/// `oint S' dq` around the bound orbit: the upper branch from left to right
/// turning point joined with the lower branch back again.
pub fn closed_orbit_integral(model: &dyn ModelSpec, energy: f64, center: f64, grid_n: usize) -> Result<f64> {
    let upper = solve_characteristics(model, energy, Branch::Upper, Region::Well { center }, grid_n)?;
    let lower = solve_characteristics(model, energy, Branch::Lower, Region::Well { center }, grid_n)?;
    Ok(upper.span() - lower.span())
}
