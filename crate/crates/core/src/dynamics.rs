//! Phase-space states, trajectories and time integration.
//!
//! Conservative runs use kick-drift-kick leapfrog, which is symplectic and
//! time-reversible for separable models. Anything that adds a
//! velocity-dependent force goes through classical RK4.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::models::ModelSpec;

/// Escape bound for `|q|` and `|p|`.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// A point `(q, p)` of phase space at time `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: f64,
    pub p: f64,
    pub tau: f64,
}

impl PhaseState {
    pub fn new(q: f64, p: f64, tau: f64) -> Self {
        Self { q, p, tau }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite() && self.tau.is_finite()
    }

    fn escaped(&self) -> bool {
        !self.is_finite() || self.q.abs() > DIVERGENCE_BOUND || self.p.abs() > DIVERGENCE_BOUND
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Leapfrog,
    Rk4,
}

impl Scheme {
    fn name(self) -> &'static str {
        match self {
            Scheme::Leapfrog => "leapfrog",
            Scheme::Rk4 => "rk4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub output_stride: usize,
    pub scheme: Scheme,
}

impl IntegratorConfig {
    pub fn new(dt: f64, n_steps: usize, output_stride: usize, scheme: Scheme) -> Self {
        Self {
            dt,
            n_steps,
            output_stride,
            scheme,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive and finite, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps must be >= 1"));
        }
        if self.output_stride == 0 {
            return Err(invalid("output_stride must be >= 1"));
        }
        Ok(())
    }
}

/// An external (possibly non-conservative) generalized force on `p`.
pub trait Forcing: Sync {
    fn force(&self, model: &dyn ModelSpec, q: f64, p: f64, tau: f64) -> f64;

    /// True if the force depends on `p`; such forces rule out leapfrog.
    fn velocity_dependent(&self) -> bool;
}

/// A sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub dt: f64,
    pub output_stride: usize,
    pub model_id: String,
    pub seed: u64,
}

impl Trajectory {
    /// Time between consecutive samples.
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.output_stride as f64
    }

    pub fn last(&self) -> PhaseState {
        *self.samples.last().expect("trajectories are non-empty")
    }

    pub fn duration(&self) -> f64 {
        self.last().tau - self.samples[0].tau
    }

    /// Writes the trajectory as CSV `tau,q,p,energy`.
    pub fn write_csv<W: Write>(&self, model: &dyn ModelSpec, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,q,p,energy")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(s.tau),
                fmt_f64(s.q),
                fmt_f64(s.p),
                fmt_f64(energy(model, s))
            )?;
        }
        Ok(())
    }

    /// Parses CSV with a `tau,q,p[,...]` header. Metadata fields are filled
    /// from the arguments; `dt` is inferred from the first sample spacing.
    pub fn read_csv(text: &str, model_id: &str, seed: u64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| invalid("empty trajectory file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let find = |name: &str| {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| invalid(format!("trajectory header lacks `{name}`")))
        };
        let (it, iq, ip) = (find("tau")?, find("q")?, find("p")?);
        let mut samples = Vec::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let get = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .ok_or_else(|| invalid(format!("row {} is short", n + 2)))?
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("row {}: {e}", n + 2)))
            };
            samples.push(PhaseState::new(get(iq)?, get(ip)?, get(it)?));
        }
        if samples.is_empty() {
            return Err(invalid("trajectory has no samples"));
        }
        let dt = if samples.len() > 1 {
            samples[1].tau - samples[0].tau
        } else {
            0.0
        };
        Ok(Self {
            samples,
            dt,
            output_stride: 1,
            model_id: model_id.to_string(),
            seed,
        })
    }
}

/// `H(q, p)` at the state's time.
pub fn energy(model: &dyn ModelSpec, s: &PhaseState) -> f64 {
    model.hamiltonian(s.q, s.p, s.tau)
}

fn leapfrog(model: &dyn ModelSpec, s: &PhaseState, dt: f64, forcing: Option<&dyn Forcing>) -> PhaseState {
    let kick = |q: f64, p: f64, tau: f64| {
        let f = forcing.map_or(0.0, |f| f.force(model, q, p, tau));
        -model.dh_dq(q, p, tau) + f
    };
    let half = 0.5 * dt;
    let p_half = s.p + half * kick(s.q, s.p, s.tau);
    let q_new = s.q + dt * model.dh_dp(s.q, p_half, s.tau + half);
    let tau_new = s.tau + dt;
    let p_new = p_half + half * kick(q_new, p_half, tau_new);
    PhaseState::new(q_new, p_new, tau_new)
}

/// One kick-drift-kick leapfrog step.
///
/// `dt` may be negative, which runs the map backwards in time.
pub fn step_symplectic(model: &dyn ModelSpec, s: &PhaseState, dt: f64) -> Result<PhaseState> {
    if !model.is_separable() {
        return Err(Error::UnsupportedScheme {
            scheme: "leapfrog",
            model: model.id().to_string(),
            reason: "model is not separable",
        });
    }
    if dt == 0.0 || !dt.is_finite() {
        return Err(invalid(format!("dt must be non-zero and finite, got {dt}")));
    }
    Ok(leapfrog(model, s, dt, None))
}

/// One classical RK4 step of the canonical equations plus external force.
pub fn step_rk4(model: &dyn ModelSpec, s: &PhaseState, dt: f64, forcing: Option<&dyn Forcing>) -> PhaseState {
    let rhs = |q: f64, p: f64, tau: f64| {
        let f = forcing.map_or(0.0, |f| f.force(model, q, p, tau));
        (model.dh_dp(q, p, tau), -model.dh_dq(q, p, tau) + f)
    };
    let h = dt;
    let (k1q, k1p) = rhs(s.q, s.p, s.tau);
    let (k2q, k2p) = rhs(s.q + 0.5 * h * k1q, s.p + 0.5 * h * k1p, s.tau + 0.5 * h);
    let (k3q, k3p) = rhs(s.q + 0.5 * h * k2q, s.p + 0.5 * h * k2p, s.tau + 0.5 * h);
    let (k4q, k4p) = rhs(s.q + h * k3q, s.p + h * k3p, s.tau + h);
    PhaseState::new(
        s.q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        s.p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
        s.tau + h,
    )
}

/// Integrates from `s0`, recording every `output_stride`-th state
/// (the initial state is always recorded).
pub fn integrate(
    model: &dyn ModelSpec,
    s0: PhaseState,
    cfg: &IntegratorConfig,
    forcing: Option<&dyn Forcing>,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !s0.is_finite() {
        return Err(invalid("initial state is not finite"));
    }
    if cfg.scheme == Scheme::Leapfrog {
        if !model.is_separable() {
            return Err(Error::UnsupportedScheme {
                scheme: cfg.scheme.name(),
                model: model.id().to_string(),
                reason: "model is not separable",
            });
        }
        if forcing.is_some_and(|f| f.velocity_dependent()) {
            return Err(Error::UnsupportedScheme {
                scheme: cfg.scheme.name(),
                model: model.id().to_string(),
                reason: "velocity-dependent forcing requires rk4",
            });
        }
    }
    let mut samples = Vec::with_capacity(cfg.n_steps / cfg.output_stride + 2);
    samples.push(s0);
    let mut s = s0;
    for n in 1..=cfg.n_steps {
        let next = match cfg.scheme {
            Scheme::Leapfrog => leapfrog(model, &s, cfg.dt, forcing),
            Scheme::Rk4 => step_rk4(model, &s, cfg.dt, forcing),
        };
        if next.escaped() {
            return Err(Error::Diverged { last_valid: s });
        }
        // accumulate time from the step count so that long runs stay on the grid
        s = PhaseState::new(next.q, next.p, s0.tau + n as f64 * cfg.dt);
        if n % cfg.output_stride == 0 {
            samples.push(s);
        }
    }
    Ok(Trajectory {
        samples,
        dt: cfg.dt,
        output_stride: cfg.output_stride,
        model_id: model.id().to_string(),
        seed: 0,
    })
}
