use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{activation, FilterBank};
use crate::error::{invalid, Result};
use crate::io::fmt_f64;

/// Input scaling into the compact window `|f| <= pi/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    /// Scale so that `max |f| = 0.99 pi/2`.
    Auto,
    Fixed {
        scale: f64,
    },
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Low-pass with `phi`, subsampled by `2^J`.
    Window,
    /// Mean over all positions (one window).
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HstOptions {
    pub m_max: usize,
    pub normalization: Normalization,
    pub pooling: Pooling,
}

impl Default for HstOptions {
    fn default() -> Self {
        Self {
            m_max: 2,
            normalization: Normalization::Auto,
            pooling: Pooling::Window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCoefficients {
    /// Octave indices, strictly increasing (empty for order 0).
    pub path: Vec<usize>,
    pub pooled: Vec<Complex64>,
    /// Mean `|.|^2` of the activated field before pooling.
    pub energy: f64,
}

impl PathCoefficients {
    pub fn order(&self) -> usize {
        self.path.len()
    }

    pub fn label(&self) -> String {
        if self.path.is_empty() {
            "root".to_string()
        } else {
            self.path.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HstCoefficients {
    pub n: usize,
    pub j: usize,
    pub m_max: usize,
    pub pooling: Pooling,
    /// Factor applied to the input before activation.
    pub scale: f64,
    pub paths: Vec<PathCoefficients>,
    pub warnings: Vec<String>,
}

impl HstCoefficients {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "order,path,window_index,re,im")?;
        for p in &self.paths {
            let label = p.label();
            for (i, c) in p.pooled.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", p.order(), label, i, fmt_f64(c.re), fmt_f64(c.im))?;
            }
        }
        Ok(())
    }

    /// `(re, im)` of every pooled value in path order.
    pub fn flatten(&self) -> Vec<f64> {
        self.paths
            .iter()
            .flat_map(|p| p.pooled.iter().flat_map(|c| [c.re, c.im]))
            .collect()
    }

    pub fn shape(&self) -> Vec<(Vec<usize>, usize)> {
        self.paths.iter().map(|p| (p.path.clone(), p.pooled.len())).collect()
    }
}

/// All strictly increasing octave sequences of length `0..=m_max` drawn
/// from `0..j`, ordered by length then lexicographically.
pub fn wick_paths(j: usize, m_max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..m_max {
        let mut next = Vec::new();
        for p in &frontier {
            let start = p.last().map_or(0, |&l| l + 1);
            for s in start..j {
                let mut q = p.clone();
                q.push(s);
                next.push(q);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

struct Convolver {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl Convolver {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            n,
        }
    }

    /// Circular convolution with a zero-mean filter. The first sample is
    /// subtracted first (which the filter annihilates) so that a constant
    /// input gives exactly zero.
    fn zero_mean(&self, u: &[Complex64], filter: &[f64]) -> Vec<Complex64> {
        let u0 = u[0];
        let mut buf: Vec<Complex64> = u.iter().map(|&v| v - u0).collect();
        self.apply(&mut buf, filter);
        buf
    }

    fn apply(&self, buf: &mut [Complex64], filter: &[f64]) {
        self.forward.process(buf);
        let inv_n = 1.0 / self.n as f64;
        for (b, &f) in buf.iter_mut().zip(filter) {
            *b *= f * inv_n;
        }
        self.inverse.process(buf);
    }
}

/// Scattering coefficients of `signal` on every path of order up to
/// `opts.m_max`: order 0 pools `activation(f)`, and the path
/// `(j1, .., jm)` pools `activation(psi_jm * .. activation(psi_j1 * activation(f)))`.
pub fn hst_forward(signal: &[Complex64], bank: &FilterBank, opts: &HstOptions) -> Result<HstCoefficients> {
    let n = signal.len();
    if n != bank.n {
        return Err(invalid(format!(
            "signal length {n} does not match the filter bank ({})",
            bank.n
        )));
    }
    if opts.m_max > bank.j {
        return Err(invalid(format!("m_max={} exceeds J={}", opts.m_max, bank.j)));
    }
    if signal.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(invalid("signal has non-finite samples"));
    }
    let peak = signal.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scale = match opts.normalization {
        Normalization::Auto if peak > 0.0 => 0.99 * FRAC_PI_2 / peak,
        Normalization::Auto | Normalization::None => 1.0,
        Normalization::Fixed { scale } if scale > 0.0 && scale.is_finite() => scale,
        Normalization::Fixed { scale } => return Err(invalid(format!("scale must be positive, got {scale}"))),
    };
    let mut warnings = Vec::new();
    if peak * scale > FRAC_PI_2 {
        warnings.push(format!(
            "scaled input reaches |f| = {:.6} > pi/2; samples enter the complex branch region",
            peak * scale
        ));
    }
    let conv = Convolver::new(n);
    let stride = 1usize << bank.j;
    let pool = |u: &[Complex64]| -> Vec<Complex64> {
        match opts.pooling {
            Pooling::Global => vec![u.iter().sum::<Complex64>() / n as f64],
            Pooling::Window => {
                let mut buf = u.to_vec();
                conv.apply(&mut buf, &bank.phi_hat);
                buf.into_iter().step_by(stride).collect()
            }
        }
    };
    let energy = |u: &[Complex64]| u.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;

    let root: Vec<Complex64> = signal.iter().map(|&c| activation(c * scale)).collect();
    let mut paths = vec![PathCoefficients {
        path: vec![],
        pooled: pool(&root),
        energy: energy(&root),
    }];
    // depth-first over the path tree, reusing each prefix field
    let mut stack: Vec<(Vec<usize>, Vec<Complex64>)> = vec![(vec![], root)];
    let mut fields: Vec<(Vec<usize>, Vec<Complex64>)> = Vec::new();
    while let Some((prefix, field)) = stack.pop() {
        if prefix.len() == opts.m_max {
            continue;
        }
        let start = prefix.last().map_or(0, |&l| l + 1);
        for j in start..bank.j {
            let mut u = conv.zero_mean(&field, &bank.psi_hat[j]);
            for v in u.iter_mut() {
                *v = activation(*v);
            }
            let mut path = prefix.clone();
            path.push(j);
            fields.push((path.clone(), u.clone()));
            stack.push((path, u));
        }
    }
    // report in canonical (order, lexicographic) path order
    fields.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then(a.0.cmp(&b.0)));
    for (path, u) in fields {
        paths.push(PathCoefficients {
            pooled: pool(&u),
            energy: energy(&u),
            path,
        });
    }
    Ok(HstCoefficients {
        n,
        j: bank.j,
        m_max: opts.m_max,
        pooling: opts.pooling,
        scale,
        paths,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hst::build_filterbank;
    use std::f64::consts::PI;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    fn tone(n: usize, bin: f64, amp: f64) -> Vec<Complex64> {
        (0..n)
            .map(|x| Complex64::new(amp * (2.0 * PI * bin * x as f64 / n as f64).cos(), 0.0))
            .collect()
    }

    #[test]
    fn path_counts() {
        for j in 1..7 {
            for m in 0..=j {
                let paths = wick_paths(j, m);
                assert_eq!(paths.len(), (0..=m).map(|k| binom(j, k)).sum::<usize>());
                assert!(paths.iter().all(|p| p.windows(2).all(|w| w[1] > w[0])));
            }
        }
    }

    #[test]
    fn constant_signal_is_annihilated() {
        let bank = build_filterbank(256, 4, FRAC_PI_2, None).unwrap();
        let f = vec![Complex64::new(0.7, -0.2); 256];
        let out = hst_forward(
            &f,
            &bank,
            &HstOptions {
                m_max: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.paths.len(), 1 + 4 + 6 + 4);
        for p in &out.paths[1..] {
            assert!(p.pooled.iter().all(|c| c.re == 0.0 && c.im == 0.0), "{}", p.label());
            assert_eq!(p.energy, 0.0);
        }
        assert!(out.paths[0].pooled.iter().any(|c| c.norm() > 0.0));
    }

    #[test]
    fn shift_invariant_under_global_pooling() {
        let bank = build_filterbank(512, 5, FRAC_PI_2, None).unwrap();
        let f: Vec<Complex64> = (0..512)
            .map(|x| {
                let t = x as f64 / 512.0;
                Complex64::new(
                    (2.0 * PI * 7.0 * t).sin() + 0.3 * (2.0 * PI * 40.0 * t).cos() + 0.1 * t,
                    0.0,
                )
            })
            .collect();
        let opts = HstOptions {
            m_max: 2,
            normalization: Normalization::Auto,
            pooling: Pooling::Global,
        };
        let a = hst_forward(&f, &bank, &opts).unwrap();
        let mut g = f.clone();
        g.rotate_right(37);
        let b = hst_forward(&g, &bank, &opts).unwrap();
        for (x, y) in a.flatten().iter().zip(b.flatten()) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn tone_lands_on_its_octave() {
        let bank = build_filterbank(1024, 6, FRAC_PI_2, None).unwrap();
        let out = hst_forward(
            &tone(1024, 16.0, 1.0),
            &bank,
            &HstOptions {
                m_max: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let best = out.paths[1..]
            .iter()
            .max_by(|a, b| a.energy.total_cmp(&b.energy))
            .unwrap();
        // bin 16 is the centre of octave 4 (xi0 = pi/2 sits on bin 256)
        assert_eq!(best.path, vec![4]);
    }

    #[test]
    fn window_pooling_shape_and_csv() {
        let bank = build_filterbank(256, 3, FRAC_PI_2, None).unwrap();
        let out = hst_forward(&tone(256, 5.0, 2.0), &bank, &HstOptions::default()).unwrap();
        assert!(out.paths.iter().all(|p| p.pooled.len() == 32));
        assert!((out.scale - 0.99 * FRAC_PI_2 / 2.0).abs() < 1e-15);
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("order,path,window_index,re,im\n0,root,0,"));
        assert_eq!(text.lines().count(), 1 + 7 * 32);
    }

    #[test]
    fn unscaled_input_warns() {
        let bank = build_filterbank(64, 2, FRAC_PI_2, None).unwrap();
        let opts = HstOptions {
            normalization: Normalization::None,
            ..Default::default()
        };
        let out = hst_forward(&tone(64, 3.0, 5.0), &bank, &opts).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(hst_forward(&tone(32, 3.0, 1.0), &bank, &opts).is_err());
    }
}
