use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::AnalyticHamiltonian;

/// Rectangle in the complex `beta` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ComplexRect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }
}

/// A zero of `H'(beta)`: a point where the orbital frequency vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaStar {
    pub beta: Complex64,
    pub h_at_star: Complex64,
    pub multiplicity: u32,
}

fn distance_to_poles(h: &dyn AnalyticHamiltonian, z: Complex64) -> f64 {
    h.poles().iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min)
}

/// Number of zeros minus poles of `H'` inside a circle, by the winding of
/// `H'` around it.
fn winding_number(h: &dyn AnalyticHamiltonian, center: Complex64, radius: f64) -> Result<i64> {
    let n = 512;
    let mut total = 0.0;
    let mut prev = h.derivative(center + radius)?;
    for k in 1..=n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let cur = h.derivative(center + Complex64::from_polar(radius, theta))?;
        total += (cur / prev).arg();
        prev = cur;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

fn newton_on_derivative(h: &dyn AnalyticHamiltonian, mut z: Complex64, multiplicity: f64) -> Option<Complex64> {
    for _ in 0..200 {
        let d1 = h.derivative(z).ok()?;
        if d1.norm() == 0.0 || (multiplicity == 1.0 && d1.norm() < 1e-15) {
            return Some(z);
        }
        let d2 = h.second_derivative(z).ok()?;
        if d2.norm() == 0.0 {
            return None;
        }
        let step = multiplicity * d1 / d2;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return None;
        }
        if step.norm() < 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    Some(z)
}

/// Roots of `H'(beta) = 0` in `bounds` by grid-seeded complex Newton,
/// deduplicated to `1e-10`.
pub fn find_beta_star(h: &dyn AnalyticHamiltonian, bounds: ComplexRect, grid_n: usize) -> Result<Vec<BetaStar>> {
    if grid_n < 2 {
        return Err(invalid("grid_n must be >= 2"));
    }
    let mut found: Vec<BetaStar> = Vec::new();
    for i in 0..grid_n {
        for j in 0..grid_n {
            let seed = Complex64::new(
                bounds.re_min + (bounds.re_max - bounds.re_min) * (i as f64 + 0.5) / grid_n as f64,
                bounds.im_min + (bounds.im_max - bounds.im_min) * (j as f64 + 0.5) / grid_n as f64,
            );
            if distance_to_poles(h, seed) < 1e-6 {
                continue;
            }
            let Some(mut z) = newton_on_derivative(h, seed, 1.0) else {
                continue;
            };
            if !bounds.contains(z, 1e-9) {
                continue;
            }
            let radius = 1e-3_f64.min(0.5 * distance_to_poles(h, z));
            let multiplicity = winding_number(h, z, radius)?.max(1) as u32;
            if multiplicity > 1 {
                // modified Newton restores quadratic convergence at a multiple root
                z = newton_on_derivative(h, z, multiplicity as f64).unwrap_or(z);
            }
            let Ok(d) = h.derivative(z) else { continue };
            if d.norm() >= 1e-10 {
                continue;
            }
            if found.iter().all(|b| (b.beta - z).norm() > 1e-10) {
                found.push(BetaStar {
                    beta: z,
                    h_at_star: h.value(z)?,
                    multiplicity,
                });
            }
        }
    }
    found.sort_by(|a, b| a.beta.re.total_cmp(&b.beta.re).then(a.beta.im.total_cmp(&b.beta.im)));
    Ok(found)
}

/// Integrates `beta' = i conj(H'(beta))` with RK4, returning `n + 1` points.
///
/// Along this flow `Re H` is conserved and `Im H` advances at rate `|H'|^2`.
pub fn geodesic_flow(h: &dyn AnalyticHamiltonian, beta0: Complex64, dt: f64, n: usize) -> Result<Vec<Complex64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let check = |z: Complex64| -> Result<()> {
        if distance_to_poles(h, z) < 1e-12 || !(z.re.is_finite() && z.im.is_finite()) {
            Err(Error::Diverged {
                last_valid: crate::dynamics::PhaseState::new(z.im, z.re, 0.0),
            })
        } else {
            Ok(())
        }
    };
    let velocity = |z: Complex64| -> Result<Complex64> {
        check(z)?;
        Ok(Complex64::i() * h.derivative(z)?.conj())
    };
    check(beta0)?;
    let mut path = Vec::with_capacity(n + 1);
    path.push(beta0);
    let mut z = beta0;
    for _ in 0..n {
        let k1 = velocity(z)?;
        let k2 = velocity(z + 0.5 * dt * k1)?;
        let k3 = velocity(z + 0.5 * dt * k2)?;
        let k4 = velocity(z + dt * k3)?;
        z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check(z)?;
        path.push(z);
    }
    Ok(path)
}

/// Taylor coefficients `d^m S / d beta^m` for `m = 1..=m_max`, with
/// `S(beta) = i int H d beta`, so `S_m = i H^(m-1)(beta0)`.
///
/// Derivatives come from the Cauchy integral on a circle of `radius`
/// (trapezoidal rule, which converges geometrically for analytic `H`).
/// When `radius` is `None` it is half the distance to the nearest pole,
/// capped at 1.
pub fn smatrix_coeffs(
    h: &dyn AnalyticHamiltonian,
    beta0: Complex64,
    m_max: usize,
    radius: Option<f64>,
) -> Result<Vec<Complex64>> {
    if !(1..=12).contains(&m_max) {
        return Err(invalid(format!("m_max must be in 1..=12, got {m_max}")));
    }
    let pole_dist = distance_to_poles(h, beta0);
    let r = radius.unwrap_or_else(|| (0.5 * pole_dist).min(1.0));
    if !(r > 0.0) || r >= pole_dist {
        return Err(Error::Domain(format!(
            "Cauchy circle of radius {r} around {beta0} reaches a pole at distance {pole_dist}"
        )));
    }
    let n = 128;
    let samples: Vec<(Complex64, Complex64)> = (0..n)
        .map(|j| {
            let w = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
            h.value(beta0 + r * w).map(|v| (w, v))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(m_max);
    let mut factorial = 1.0;
    for k in 0..m_max {
        if k > 0 {
            factorial *= k as f64;
        }
        // H^(k)(beta0) = k! / r^k * mean_j H(beta_j) w_j^-k
        let sum: Complex64 = samples.iter().map(|&(w, v)| v * w.powi(-(k as i32))).sum();
        let deriv = sum / n as f64 * factorial / r.powi(k as i32);
        out.push(Complex64::i() * deriv);
    }
    Ok(out)
}
