//! Concrete Hamiltonian systems.
//!
//! All models are nondimensionalized (g = l = m = 1). Real models implement
//! [`ModelSpec`]; complex-analytic Hamiltonians implement
//! [`AnalyticHamiltonian`].

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A one-degree-of-freedom Hamiltonian system `H(q, p, tau)`.
pub trait ModelSpec: Send + Sync {
    fn id(&self) -> &str;

    fn hamiltonian(&self, q: f64, p: f64, tau: f64) -> f64;

    fn dh_dq(&self, q: f64, p: f64, tau: f64) -> f64;

    fn dh_dp(&self, q: f64, p: f64, tau: f64) -> f64;

    /// True when `H = p^2/2 + V(q, tau)`.
    fn is_separable(&self) -> bool;

    fn is_time_dependent(&self) -> bool {
        false
    }

    /// Potential `V(q, tau)` for separable models.
    fn potential(&self, _q: f64, _tau: f64) -> Option<f64> {
        None
    }

    /// Second derivatives `[[H_qq, H_qp], [H_pq, H_pp]]`.
    ///
    /// The default is a central difference of the analytic gradient.
    fn hessian(&self, q: f64, p: f64, tau: f64) -> [[f64; 2]; 2] {
        let h = 1e-5;
        let hqq = (self.dh_dq(q + h, p, tau) - self.dh_dq(q - h, p, tau)) / (2.0 * h);
        let hpp = (self.dh_dp(q, p + h, tau) - self.dh_dp(q, p - h, tau)) / (2.0 * h);
        let hqp = 0.5
            * ((self.dh_dq(q, p + h, tau) - self.dh_dq(q, p - h, tau)) / (2.0 * h)
                + (self.dh_dp(q + h, p, tau) - self.dh_dp(q - h, p, tau)) / (2.0 * h));
        [[hqq, hqp], [hqp, hpp]]
    }

    /// Pivot-vibration drive `(a, omega)` when the model carries one.
    fn drive(&self) -> Option<(f64, f64)> {
        None
    }

    fn parameters(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }
}

/// `H = p^2/2 - cos q`; o-point (0,0) at E = -1, x-point (pi,0) at E = +1.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum;

/// `H = p^2/2 + (q^2 - 1)^2/4`; o-points (+-1, 0), x-point (0,0) at E_s = 1/4.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWell;

/// `H = (p^2 + q^2)/2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Harmonic;

/// Inverted pendulum on a vibrating pivot, angle measured from the inverted
/// position: `H = p^2/2 + (1 - a w^2 cos(w tau)) cos(theta)`.
#[derive(Debug, Clone, Copy)]
pub struct Kapitza {
    pub a: f64,
    pub omega: f64,
}

pub fn make_pendulum() -> Pendulum {
    Pendulum
}

pub fn make_double_well() -> DoubleWell {
    DoubleWell
}

pub fn make_harmonic() -> Harmonic {
    Harmonic
}

pub fn make_kapitza(a: f64, omega: f64) -> Result<Kapitza> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(crate::error::invalid(format!(
            "kapitza amplitude must be >= 0, got {a}"
        )));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(crate::error::invalid(format!(
            "kapitza drive frequency must be > 0, got {omega}"
        )));
    }
    Ok(Kapitza { a, omega })
}

impl ModelSpec for Pendulum {
    fn id(&self) -> &str {
        "pendulum"
    }
    fn hamiltonian(&self, q: f64, p: f64, _tau: f64) -> f64 {
        0.5 * p * p - q.cos()
    }
    fn dh_dq(&self, q: f64, _p: f64, _tau: f64) -> f64 {
        q.sin()
    }
    fn dh_dp(&self, _q: f64, p: f64, _tau: f64) -> f64 {
        p
    }
    fn is_separable(&self) -> bool {
        true
    }
    fn potential(&self, q: f64, _tau: f64) -> Option<f64> {
        Some(-q.cos())
    }
    fn hessian(&self, q: f64, _p: f64, _tau: f64) -> [[f64; 2]; 2] {
        [[q.cos(), 0.0], [0.0, 1.0]]
    }
}

impl ModelSpec for DoubleWell {
    fn id(&self) -> &str {
        "double_well"
    }
    fn hamiltonian(&self, q: f64, p: f64, _tau: f64) -> f64 {
        let w = q * q - 1.0;
        0.5 * p * p + 0.25 * w * w
    }
    fn dh_dq(&self, q: f64, _p: f64, _tau: f64) -> f64 {
        q * q * q - q
    }
    fn dh_dp(&self, _q: f64, p: f64, _tau: f64) -> f64 {
        p
    }
    fn is_separable(&self) -> bool {
        true
    }
    fn potential(&self, q: f64, _tau: f64) -> Option<f64> {
        let w = q * q - 1.0;
        Some(0.25 * w * w)
    }
    fn hessian(&self, q: f64, _p: f64, _tau: f64) -> [[f64; 2]; 2] {
        [[3.0 * q * q - 1.0, 0.0], [0.0, 1.0]]
    }
}

impl ModelSpec for Harmonic {
    fn id(&self) -> &str {
        "harmonic"
    }
    fn hamiltonian(&self, q: f64, p: f64, _tau: f64) -> f64 {
        0.5 * (p * p + q * q)
    }
    fn dh_dq(&self, q: f64, _p: f64, _tau: f64) -> f64 {
        q
    }
    fn dh_dp(&self, _q: f64, p: f64, _tau: f64) -> f64 {
        p
    }
    fn is_separable(&self) -> bool {
        true
    }
    fn potential(&self, q: f64, _tau: f64) -> Option<f64> {
        Some(0.5 * q * q)
    }
    fn hessian(&self, _q: f64, _p: f64, _tau: f64) -> [[f64; 2]; 2] {
        [[1.0, 0.0], [0.0, 1.0]]
    }
}

impl Kapitza {
    fn gravity_factor(&self, tau: f64) -> f64 {
        1.0 - self.a * self.omega * self.omega * (self.omega * tau).cos()
    }
}

impl ModelSpec for Kapitza {
    fn id(&self) -> &str {
        "kapitza"
    }
    fn hamiltonian(&self, q: f64, p: f64, tau: f64) -> f64 {
        0.5 * p * p + self.gravity_factor(tau) * q.cos()
    }
    fn dh_dq(&self, q: f64, _p: f64, tau: f64) -> f64 {
        -self.gravity_factor(tau) * q.sin()
    }
    fn dh_dp(&self, _q: f64, p: f64, _tau: f64) -> f64 {
        p
    }
    fn is_separable(&self) -> bool {
        true
    }
    fn is_time_dependent(&self) -> bool {
        self.a != 0.0
    }
    fn potential(&self, q: f64, tau: f64) -> Option<f64> {
        Some(self.gravity_factor(tau) * q.cos())
    }
    fn hessian(&self, q: f64, _p: f64, tau: f64) -> [[f64; 2]; 2] {
        [[-self.gravity_factor(tau) * q.cos(), 0.0], [0.0, 1.0]]
    }
    fn drive(&self) -> Option<(f64, f64)> {
        Some((self.a, self.omega))
    }
    fn parameters(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("a".to_string(), self.a), ("omega".to_string(), self.omega)])
    }
}

/// Model ids accepted by [`model_by_id`].
pub const MODEL_IDS: [&str; 5] = ["pendulum", "double_well", "kapitza", "harmonic", "joukowski"];

/// Builds a real model from its id. Kapitza reads `a` and `omega` from
/// `params` (defaults 0.1 and 30).
pub fn model_by_id(id: &str, params: &BTreeMap<String, f64>) -> Result<Box<dyn ModelSpec>> {
    match id {
        "pendulum" => Ok(Box::new(Pendulum)),
        "double_well" => Ok(Box::new(DoubleWell)),
        "harmonic" => Ok(Box::new(Harmonic)),
        "kapitza" => {
            let a = params.get("a").copied().unwrap_or(0.1);
            let omega = params.get("omega").copied().unwrap_or(30.0);
            Ok(Box::new(make_kapitza(a, omega)?))
        }
        "joukowski" => Err(crate::error::invalid(
            "`joukowski` is a complex-analytic Hamiltonian, not a phase-space model",
        )),
        other => Err(crate::error::invalid(format!("unknown model id `{other}`"))),
    }
}

/// Max relative mismatch between analytic gradients and central differences
/// of `H` over the given points.
pub fn gradient_mismatch(model: &dyn ModelSpec, points: &[(f64, f64, f64)]) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for &(q, p, tau) in points {
        let fd_q = (model.hamiltonian(q + h, p, tau) - model.hamiltonian(q - h, p, tau)) / (2.0 * h);
        let fd_p = (model.hamiltonian(q, p + h, tau) - model.hamiltonian(q, p - h, tau)) / (2.0 * h);
        let an_q = model.dh_dq(q, p, tau);
        let an_p = model.dh_dp(q, p, tau);
        let scale = 1.0_f64.max(an_q.abs()).max(an_p.abs());
        worst = worst.max((fd_q - an_q).abs() / scale).max((fd_p - an_p).abs() / scale);
    }
    worst
}

/// A complex-analytic Hamiltonian `H(beta)`.
pub trait AnalyticHamiltonian: Send + Sync {
    fn id(&self) -> &str;

    fn value(&self, beta: Complex64) -> Result<Complex64>;

    fn derivative(&self, beta: Complex64) -> Result<Complex64>;

    /// Second derivative; default is a complex central difference of `derivative`.
    fn second_derivative(&self, beta: Complex64) -> Result<Complex64> {
        let h = 1e-5;
        let fp = self.derivative(beta + h)?;
        let fm = self.derivative(beta - h)?;
        Ok((fp - fm) / (2.0 * h))
    }

    /// Isolated poles of `H` (excluded from the domain).
    fn poles(&self) -> Vec<Complex64> {
        Vec::new()
    }
}

/// `H(beta) = (beta + 1/beta)/2`, singular at `beta = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Joukowski;

pub fn make_joukowski() -> Joukowski {
    Joukowski
}

impl AnalyticHamiltonian for Joukowski {
    fn id(&self) -> &str {
        "joukowski"
    }
    fn value(&self, beta: Complex64) -> Result<Complex64> {
        if beta == Complex64::new(0.0, 0.0) {
            return Err(Error::Domain("joukowski H is singular at beta = 0".into()));
        }
        Ok(0.5 * (beta + beta.inv()))
    }
    fn derivative(&self, beta: Complex64) -> Result<Complex64> {
        if beta == Complex64::new(0.0, 0.0) {
            return Err(Error::Domain("joukowski H' is singular at beta = 0".into()));
        }
        Ok(0.5 * (1.0 - (beta * beta).inv()))
    }
    fn second_derivative(&self, beta: Complex64) -> Result<Complex64> {
        if beta == Complex64::new(0.0, 0.0) {
            return Err(Error::Domain("joukowski H'' is singular at beta = 0".into()));
        }
        Ok((beta * beta * beta).inv())
    }
    fn poles(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0)]
    }
}

/// Polynomial `H(beta) = sum_k c_k beta^k` (entire).
#[derive(Debug, Clone)]
pub struct PolynomialHamiltonian {
    pub coeffs: Vec<Complex64>,
}

impl PolynomialHamiltonian {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    fn horner(coeffs: &[Complex64], beta: Complex64) -> Complex64 {
        coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * beta + c)
    }

    fn derived(coeffs: &[Complex64]) -> Vec<Complex64> {
        coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect()
    }
}

impl AnalyticHamiltonian for PolynomialHamiltonian {
    fn id(&self) -> &str {
        "polynomial"
    }
    fn value(&self, beta: Complex64) -> Result<Complex64> {
        Ok(Self::horner(&self.coeffs, beta))
    }
    fn derivative(&self, beta: Complex64) -> Result<Complex64> {
        Ok(Self::horner(&Self::derived(&self.coeffs), beta))
    }
    fn second_derivative(&self, beta: Complex64) -> Result<Complex64> {
        Ok(Self::horner(&Self::derived(&Self::derived(&self.coeffs)), beta))
    }
}

/// Max Cauchy-Riemann residual of `H` at the given points, measured with
/// centered differences along the real and imaginary axes.
pub fn cauchy_riemann_residual(h: &dyn AnalyticHamiltonian, points: &[Complex64]) -> Result<f64> {
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for &b in points {
        let dx = (h.value(b + step)? - h.value(b - step)?) / (2.0 * step);
        let i_step = Complex64::new(0.0, step);
        let dy = (h.value(b + i_step)? - h.value(b - i_step)?) / (2.0 * step);
        // analytic: dH/dy = i dH/dx
        let scale = 1.0_f64.max(dx.norm());
        worst = worst.max((dy - Complex64::i() * dx).norm() / scale);
    }
    Ok(worst)
}
