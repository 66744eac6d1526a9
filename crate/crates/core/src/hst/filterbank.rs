use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Frequency responses on the `N` FFT bins (bin `k` is `2 pi k / N`
/// rad/sample for `k < N/2`, negative frequencies above).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub n: usize,
    pub j: usize,
    pub xi0: f64,
    pub sigma: f64,
    /// Mother wavelets `psi_j`, centre `xi0 / 2^j`, width `sigma / 2^j`.
    #[serde(skip)]
    pub psi_hat: Vec<Vec<f64>>,
    /// Gaussian low-pass with `phi_hat(0) = 1`.
    #[serde(skip)]
    pub phi_hat: Vec<f64>,
    /// Gain applied to every wavelet so the Littlewood-Paley sum peaks at 1.
    pub psi_gain: f64,
}

impl FilterBank {
    pub fn frequency(&self, k: usize) -> f64 {
        let k = if k <= self.n / 2 {
            k as f64
        } else {
            k as f64 - self.n as f64
        };
        2.0 * PI * k / self.n as f64
    }

    pub fn centre(&self, j: usize) -> f64 {
        self.xi0 / (1u64 << j) as f64
    }

    /// `sum_j |psi_hat_j|^2 + |phi_hat|^2` per bin.
    pub fn littlewood_paley(&self) -> Vec<f64> {
        (0..self.n)
            .map(|k| self.phi_hat[k].powi(2) + self.psi_hat.iter().map(|p| p[k] * p[k]).sum::<f64>())
            .collect()
    }

    /// Last bin of the covered band `[0, xi0]`.
    pub fn band_end(&self) -> usize {
        (self.xi0 * self.n as f64 / (2.0 * PI)).floor() as usize
    }
}

/// Analytic Gabor filter bank with `j_count` octaves. `sigma` defaults to
/// `xi0 / 3`. Each wavelet is zero on the DC bin and on all non-positive
/// frequencies, so it has exactly zero mean and is exactly analytic.
pub fn build_filterbank(n: usize, j_count: usize, xi0: f64, sigma: Option<f64>) -> Result<FilterBank> {
    if n < 8 || !n.is_power_of_two() {
        return Err(invalid(format!("signal length must be a power of two >= 8, got {n}")));
    }
    if j_count == 0 || j_count >= 63 || (1usize << j_count) > n / 4 {
        return Err(invalid(format!("J={j_count} needs 1 <= 2^J <= N/4 = {}", n / 4)));
    }
    if !(xi0 > 0.0 && xi0 < PI) {
        return Err(invalid(format!("xi0 must lie in (0, pi), got {xi0}")));
    }
    let sigma = sigma.unwrap_or(xi0 / 3.0);
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    let mut bank = FilterBank {
        n,
        j: j_count,
        xi0,
        sigma,
        psi_hat: vec![],
        phi_hat: vec![],
        psi_gain: 1.0,
    };
    let omega: Vec<f64> = (0..n).map(|k| bank.frequency(k)).collect();
    let gauss = |w: f64, c: f64, s: f64| (-(w - c).powi(2) / (2.0 * s * s)).exp();
    let mut psi_hat: Vec<Vec<f64>> = (0..j_count)
        .map(|j| {
            let scale = (1u64 << j) as f64;
            let (c, s) = (xi0 / scale, sigma / scale);
            omega
                .iter()
                .enumerate()
                .map(|(k, &w)| if k > 0 && k < n / 2 { gauss(w, c, s) } else { 0.0 })
                .collect()
        })
        .collect();
    let sigma_phi = 2.0 / 3.0 * bank.centre(j_count - 1);
    bank.phi_hat = omega.iter().map(|&w| gauss(w, 0.0, sigma_phi)).collect();
    // scale the wavelets so that phi^2 + g^2 sum psi^2 <= 1 on the band
    let end = bank.band_end();
    let gain2 = (1..=end)
        .filter_map(|k| {
            let s: f64 = psi_hat.iter().map(|p| p[k] * p[k]).sum();
            (s > 1e-6).then(|| (1.0 - bank.phi_hat[k].powi(2)) / s)
        })
        .fold(f64::INFINITY, f64::min);
    let gain = gain2.sqrt();
    for p in &mut psi_hat {
        for v in p.iter_mut() {
            *v *= gain;
        }
    }
    bank.psi_hat = psi_hat;
    bank.psi_gain = gain;
    Ok(bank)
}
