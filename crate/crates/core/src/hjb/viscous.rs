use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::models::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbConfig {
    pub nu: f64,
    pub grid_n: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl HjbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(invalid(format!("viscous solve needs nu > 0, got {}", self.nu)));
        }
        if !(self.tol > 0.0) || self.grid_n < 3 || self.max_iter == 0 || !(self.q_max > self.q_min) {
            return Err(invalid("need tol > 0, grid_n >= 3, max_iter >= 1 and q_min < q_max"));
        }
        Ok(())
    }
}

/// Stationary discounted value `V(q)` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViscousSolution {
    pub q_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub nu: f64,
    pub iterations: usize,
    /// Max change per sweep pair.
    pub residual_history: Vec<f64>,
}

impl ViscousSolution {
    /// Linear interpolation of `V`.
    pub fn value_at(&self, q: f64) -> f64 {
        let n = self.q_grid.len() - 1;
        let (a, b) = (self.q_grid[0], self.q_grid[n]);
        let x = ((q - a) / (b - a) * n as f64).clamp(0.0, n as f64);
        let i = (x.floor() as usize).min(n - 1);
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "q,V")?;
        for (q, v) in self.q_grid.iter().zip(&self.values) {
            writeln!(w, "{},{}", fmt_f64(*q), fmt_f64(*v))?;
        }
        Ok(())
    }
}

fn drift(model: &dyn ModelSpec, q: f64) -> f64 {
    -model.dh_dq(q, 0.0, 0.0)
}

/// One Gauss-Seidel update of node `i` against its upwind neighbour.
/// Written as `R/nu + a (V_nb - R/nu) / (nu + a)` so that a constant
/// reward is reproduced exactly.
fn update(values: &[f64], rewards: &[f64], drifts: &[f64], nu: f64, h: f64, i: usize) -> f64 {
    let n = values.len() - 1;
    let base = rewards[i] / nu;
    let f = drifts[i];
    let nb = if f > 0.0 && i < n {
        i + 1
    } else if f < 0.0 && i > 0 {
        i - 1
    } else {
        // rest point or outflow boundary, where V' = 0
        return base;
    };
    let a = f.abs() / h;
    base + a * (values[nb] - base) / (nu + a)
}

/// Solves `nu V = R + f V'` with `f = -dV_bare/dq` by first-order upwind
/// fast sweeping (alternating left and right sweeps) until the largest
/// change in a sweep pair falls below `cfg.tol`.
pub fn solve_viscous(model: &dyn ModelSpec, reward: impl Fn(f64) -> f64, cfg: &HjbConfig) -> Result<ViscousSolution> {
    cfg.validate()?;
    if model.potential(0.0, 0.0).is_none() {
        return Err(Error::ModelStructure(
            model.id().to_string(),
            "viscous solve needs H = p^2/2 + V(q)",
        ));
    }
    let n = cfg.grid_n - 1;
    let h = (cfg.q_max - cfg.q_min) / n as f64;
    let q_grid: Vec<f64> = (0..=n).map(|i| cfg.q_min + h * i as f64).collect();
    let rewards: Vec<f64> = q_grid.iter().map(|&q| reward(q)).collect();
    let drifts: Vec<f64> = q_grid.iter().map(|&q| drift(model, q)).collect();
    let mut values: Vec<f64> = rewards.iter().map(|r| r / cfg.nu).collect();
    let mut history = Vec::new();
    for iter in 1..=cfg.max_iter {
        let mut change: f64 = 0.0;
        for i in (0..=n).chain((0..=n).rev()) {
            let v = update(&values, &rewards, &drifts, cfg.nu, h, i);
            change = change.max((v - values[i]).abs());
            values[i] = v;
        }
        history.push(change);
        if !change.is_finite() {
            return Err(Error::NotConverged {
                iterations: iter,
                residual: change,
            });
        }
        if change < cfg.tol {
            return Ok(ViscousSolution {
                q_grid,
                values,
                nu: cfg.nu,
                iterations: iter,
                residual_history: history,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        residual: *history.last().unwrap(),
    })
}

/// Reference value `int_0^inf exp(-nu t) R(q(t)) dt` along the gradient
/// flow `q' = f(q)` from `q0`, by RK4 with step `dt` until the remaining
/// tail (bounded by `exp(-nu t) max R / nu`) is below `1e-12`.
pub fn trajectory_value(
    model: &dyn ModelSpec,
    reward: impl Fn(f64) -> f64,
    nu: f64,
    q0: f64,
    r_max: f64,
    dt: f64,
) -> f64 {
    let mut q = q0;
    let mut t = 0.0;
    let mut total = 0.0;
    let g = |t: f64, q: f64| (-nu * t).exp() * reward(q);
    while (-nu * t).exp() * r_max / nu > 1e-12 {
        let k1 = drift(model, q);
        let k2 = drift(model, q + 0.5 * dt * k1);
        let k3 = drift(model, q + 0.5 * dt * k2);
        let k4 = drift(model, q + dt * k3);
        let q_next = q + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let q_mid = q + 0.5 * dt * k1 + dt * dt / 8.0 * (k2 - k1);
        // Simpson on the step
        total += dt / 6.0 * (g(t, q) + 4.0 * g(t + 0.5 * dt, q_mid) + g(t + dt, q_next));
        q = q_next;
        t += dt;
    }
    total
}
