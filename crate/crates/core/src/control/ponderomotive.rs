use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dwell_time, ControlPolicy, DwellReport, Metric};
use crate::dynamics::{integrate, IntegratorConfig, PhaseState, Scheme, Trajectory};
use crate::equilibria::{classify, Equilibrium, EquilibriumKind};
use crate::error::{invalid, Error, Result};
use crate::models::{make_kapitza, ModelSpec};

/// Drive-averaged potential of the Kapitza pendulum,
/// `V_eff(theta) = cos theta + (a^2 omega^2 / 4) sin^2 theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectivePotential {
    pub a: f64,
    pub omega: f64,
}

impl EffectivePotential {
    pub fn value(&self, theta: f64) -> f64 {
        let k = self.a * self.omega;
        theta.cos() + 0.25 * k * k * theta.sin().powi(2)
    }

    /// `V_eff''(0) = a^2 omega^2 / 2 - 1`.
    pub fn curvature_at_top(&self) -> f64 {
        let k = self.a * self.omega;
        0.5 * k * k - 1.0
    }

    pub fn is_stable(&self) -> bool {
        self.curvature_at_top() > 0.0
    }

    /// Small-oscillation frequency about the inverted point, if stable.
    pub fn secular_frequency(&self) -> Option<f64> {
        self.is_stable().then(|| self.curvature_at_top().sqrt())
    }
}

/// Effective potential of a Kapitza model. Other models are rejected.
pub fn effective_potential(model: &dyn ModelSpec) -> Result<EffectivePotential> {
    if model.id() != "kapitza" {
        return Err(Error::ModelStructure(
            model.id().to_string(),
            "effective potential needs the kapitza model",
        ));
    }
    let (a, omega) = model.drive().ok_or_else(|| invalid("kapitza model reports no drive"))?;
    Ok(EffectivePotential { a, omega })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PonderomotiveOptions {
    pub steps_per_period: usize,
    /// Output samples per drive period; must divide `steps_per_period`.
    pub samples_per_period: usize,
    pub radius: f64,
    pub metric: Metric,
}

impl Default for PonderomotiveOptions {
    fn default() -> Self {
        Self {
            steps_per_period: 64,
            samples_per_period: 8,
            radius: 0.5,
            metric: Metric::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PonderomotiveReport {
    pub trajectory: Trajectory,
    pub dwell: DwellReport,
    /// Frequency of the drive-period-averaged oscillation, from
    /// stroboscopic zero crossings. `None` if fewer than two crossings.
    pub secular_frequency: Option<f64>,
    /// `sqrt(V_eff'')` at the x-point from averaging theory, if stable.
    pub predicted_frequency: Option<f64>,
    pub warnings: Vec<String>,
}

/// Nearest x-point of the undriven model to `q0` (on `p = 0`).
fn nearest_xpoint(model: &dyn ModelSpec, q0: f64) -> Result<Equilibrium> {
    let mut q = q0;
    for _ in 0..100 {
        let g = model.dh_dq(q, 0.0, 0.0);
        let c = model.hessian(q, 0.0, 0.0)[0][0];
        if c == 0.0 || !c.is_finite() {
            break;
        }
        let step = g / c;
        q -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let eq = classify(model, q, 0.0);
    if eq.kind != EquilibriumKind::XPoint || model.dh_dq(q, 0.0, 0.0).abs() > 1e-10 || (q - q0).abs() > 1.0 {
        return Err(Error::NoXPoint(format!("no x-point of {} near q={q0}", model.id())));
    }
    Ok(eq)
}

/// Runs the unaveraged fast-drive simulation of `policy` acting on the
/// undriven `base` model, starting near one of its x-points.
///
/// The averaged prediction uses `V_eff = V + (a^2 omega^2 / 4) V'^2`,
/// whose curvature at the x-point is `V'' + (a^2 omega^2 / 2) V''^2`.
pub fn run_ponderomotive(
    base: &dyn ModelSpec,
    policy: &ControlPolicy,
    s0: PhaseState,
    duration: f64,
    opts: &PonderomotiveOptions,
) -> Result<PonderomotiveReport> {
    let ControlPolicy::Ponderomotive { a, omega } = *policy else {
        return Err(invalid("run_ponderomotive needs a ponderomotive policy"));
    };
    policy.validate()?;
    if base.drive().is_some_and(|(a0, _)| a0 != 0.0) {
        return Err(invalid("base model already carries a drive; pass the undriven model"));
    }
    if !(duration > 0.0) || opts.steps_per_period == 0 || opts.samples_per_period == 0 {
        return Err(invalid("duration and sampling must be positive"));
    }
    if opts.steps_per_period % opts.samples_per_period != 0 {
        return Err(invalid("samples_per_period must divide steps_per_period"));
    }
    let xp = nearest_xpoint(base, s0.q)?;
    let lambda = xp.growth_rate().unwrap_or(0.0);
    let mut warnings = Vec::new();
    if omega < 10.0 * lambda {
        warnings.push(format!(
            "slow drive: omega={omega} is below 10x the x-point growth rate {lambda:.4}; averaging theory is unreliable"
        ));
    }

    let period = 2.0 * PI / omega;
    let dt = period / opts.steps_per_period as f64;
    let stride = opts.steps_per_period / opts.samples_per_period;
    let n_steps = (duration / (dt * stride as f64)).ceil() as usize * stride;
    let cfg = IntegratorConfig::new(dt, n_steps, stride, Scheme::Leapfrog);
    let trajectory = match integrate(base, s0, &cfg, Some(policy)) {
        Ok(t) => t,
        // the run left the box: an escape
        Err(Error::Diverged { last_valid }) => {
            let t = Trajectory {
                samples: vec![s0, last_valid],
                dt,
                output_stride: stride,
                model_id: base.id().to_string(),
                seed: 0,
            };
            let dwell = dwell_time(&t, &xp, opts.radius, opts.metric)?;
            return Ok(PonderomotiveReport {
                trajectory: t,
                dwell: DwellReport { escaped: true, ..dwell },
                secular_frequency: None,
                predicted_frequency: None,
                warnings,
            });
        }
        Err(e) => return Err(e),
    };
    let dwell = dwell_time(&trajectory, &xp, opts.radius, opts.metric)?;

    let v2 = base.hessian(xp.q, 0.0, 0.0)[0][0];
    let k = a * omega;
    let curvature = v2 + 0.5 * k * k * v2 * v2;
    let predicted_frequency = (curvature > 0.0).then(|| curvature.sqrt());
    let strobe: Vec<(f64, f64)> = trajectory
        .samples
        .iter()
        .step_by(opts.samples_per_period)
        .map(|s| (s.tau, s.q - xp.q))
        .collect();
    let secular_frequency = if dwell.escaped {
        None
    } else {
        zero_crossing_frequency(&strobe)
    };
    Ok(PonderomotiveReport {
        trajectory,
        dwell,
        secular_frequency,
        predicted_frequency,
        warnings,
    })
}

/// Angular frequency from the spacing of sign changes, interpolated linearly.
fn zero_crossing_frequency(series: &[(f64, f64)]) -> Option<f64> {
    let crossings: Vec<f64> = series
        .windows(2)
        .filter(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0))
        .map(|w| {
            let (t0, y0) = w[0];
            let (t1, y1) = w[1];
            t0 + (t1 - t0) * y0 / (y0 - y1)
        })
        .collect();
    if crossings.len() < 3 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(PI * (crossings.len() - 1) as f64 / span)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub omega: f64,
    pub escaped: bool,
    pub secular_freq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub a: f64,
    /// Evaluated drive frequencies in ascending order.
    pub rows: Vec<ThresholdRow>,
    /// Bisection estimate of the lowest stabilizing frequency.
    pub threshold: f64,
    /// Averaging-theory threshold `sqrt(2) / a`.
    pub predicted: f64,
}

impl ThresholdScan {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        use crate::io::fmt_f64;
        writeln!(w, "omega,escaped,secular_freq")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(r.omega),
                r.escaped,
                r.secular_freq.map_or("nan".into(), fmt_f64)
            )?;
        }
        Ok(())
    }
}

/// Kapitza stabilization threshold by bisection over `omega` in
/// `[omega_lo, omega_hi]`, each probe started at `theta0` and run for
/// `duration`. The coarse grid of `grid_n` probes is run in parallel.
pub fn kapitza_threshold_scan(
    a: f64,
    (omega_lo, omega_hi): (f64, f64),
    grid_n: usize,
    theta0: f64,
    duration: f64,
    tol: f64,
) -> Result<ThresholdScan> {
    if !(a > 0.0 && omega_lo > 0.0 && omega_hi > omega_lo && grid_n >= 2 && tol > 0.0) {
        return Err(invalid(
            "threshold scan needs a > 0, 0 < omega_lo < omega_hi, grid_n >= 2, tol > 0",
        ));
    }
    let base = make_kapitza(0.0, 1.0)?;
    let probe = |omega: f64| -> Result<ThresholdRow> {
        let policy = ControlPolicy::Ponderomotive { a, omega };
        let r = run_ponderomotive(
            &base,
            &policy,
            PhaseState::new(theta0, 0.0, 0.0),
            duration,
            &PonderomotiveOptions::default(),
        )?;
        Ok(ThresholdRow {
            omega,
            escaped: r.dwell.escaped,
            secular_freq: r.secular_frequency,
        })
    };
    let grid: Vec<f64> = (0..grid_n)
        .map(|i| omega_lo + (omega_hi - omega_lo) * i as f64 / (grid_n - 1) as f64)
        .collect();
    let mut rows = grid.par_iter().map(|&w| probe(w)).collect::<Result<Vec<_>>>()?;
    // bracket: last escaping probe below the first stable one
    let first_stable = rows
        .iter()
        .position(|r| !r.escaped)
        .ok_or_else(|| invalid("no stabilizing frequency in the scan range"))?;
    if first_stable == 0 {
        return Err(invalid("lowest scanned frequency is already stable; lower omega_lo"));
    }
    let (mut lo, mut hi) = (rows[first_stable - 1].omega, rows[first_stable].omega);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let r = probe(mid)?;
        if r.escaped {
            lo = mid;
        } else {
            hi = mid;
        }
        rows.push(r);
    }
    rows.sort_by(|x, y| x.omega.total_cmp(&y.omega));
    Ok(ThresholdScan {
        a,
        rows,
        threshold: 0.5 * (lo + hi),
        predicted: 2f64.sqrt() / a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Pendulum;

    #[test]
    fn averaged_curvature() {
        assert!((EffectivePotential { a: 0.1, omega: 20.0 }.curvature_at_top() - 1.0).abs() < 1e-14);
        assert!(EffectivePotential { a: 0.1, omega: 10.0 }.curvature_at_top() < 0.0);
        let bare = EffectivePotential { a: 0.0, omega: 30.0 };
        for t in [-1.0, 0.2, 2.5] {
            assert_eq!(bare.value(t), f64::cos(t));
        }
    }

    #[test]
    fn rejects_non_kapitza() {
        assert!(effective_potential(&Pendulum).is_err());
        let v = effective_potential(&make_kapitza(0.1, 30.0).unwrap()).unwrap();
        assert_eq!((v.a, v.omega), (0.1, 30.0));
    }

    #[test]
    fn fast_drive_holds_the_inverted_pendulum() {
        let base = make_kapitza(0.0, 1.0).unwrap();
        let r = run_ponderomotive(
            &base,
            &ControlPolicy::Ponderomotive { a: 0.1, omega: 30.0 },
            PhaseState::new(0.01, 0.0, 0.0),
            1000.0,
            &PonderomotiveOptions::default(),
        )
        .unwrap();
        assert!(!r.dwell.escaped);
        assert!(r.dwell.dwell_time >= 1000.0 - 1e-9, "{:?}", r.dwell);
        assert!(r.trajectory.samples.iter().all(|s| s.q.abs() < 0.1));
        let (got, want) = (r.secular_frequency.unwrap(), r.predicted_frequency.unwrap());
        assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn slow_drive_escapes() {
        let base = make_kapitza(0.0, 1.0).unwrap();
        let r = run_ponderomotive(
            &base,
            &ControlPolicy::Ponderomotive { a: 0.1, omega: 8.0 },
            PhaseState::new(0.01, 0.0, 0.0),
            200.0,
            &PonderomotiveOptions::default(),
        )
        .unwrap();
        assert!(r.dwell.escaped);
        assert!(r.warnings.len() == 1);
    }

    #[test]
    fn zero_crossings_of_a_sine() {
        let s: Vec<(f64, f64)> = (0..2000)
            .map(|i| (i as f64 * 0.01, (1.7 * i as f64 * 0.01 + 0.3).sin()))
            .collect();
        assert!((zero_crossing_frequency(&s).unwrap() - 1.7).abs() < 1e-4);
    }

    #[test]
    fn threshold_scan_brackets_the_averaged_criterion() {
        let scan = kapitza_threshold_scan(0.1, (5.0, 30.0), 11, 0.01, 200.0, 0.05).unwrap();
        let t = scan.threshold;
        assert!((t / scan.predicted - 1.0).abs() < 0.15, "{t}");
        assert!(scan.rows.windows(2).all(|w| w[0].omega < w[1].omega));
        assert!(scan.rows.first().unwrap().escaped && !scan.rows.last().unwrap().escaped);
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("omega,escaped,secular_freq\n"));
        assert!(kapitza_threshold_scan(0.1, (30.0, 5.0), 11, 0.01, 200.0, 0.05).is_err());
    }
}
