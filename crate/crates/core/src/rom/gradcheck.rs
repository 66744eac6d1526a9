use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::forward;
use super::{rom_loss, rom_loss_grad, Pair, RomParams};
use crate::error::{invalid, Result};

/// Hidden pre-activations must be at least this far from the ReLU kink.
pub const KINK_MARGIN: f64 = 1e-3;
const FD_STEP: f64 = 1e-5;
/// Gradients below this magnitude are compared in absolute terms.
const GRAD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub n_params: usize,
    /// Input perturbation rounds spent moving pre-activations off kinks.
    pub nudges: usize,
    /// Smallest hidden `|pre-activation|` at the checked inputs.
    pub min_margin: f64,
    /// The batch actually checked (after nudging).
    pub batch: Vec<Pair>,
}

/// Compares the backpropagated gradient with central differences (step
/// `1e-5`) for every parameter. Inputs with a hidden pre-activation within
/// [`KINK_MARGIN`] of a ReLU kink are first re-drawn near their original
/// value, in a box of width 1e-2 that doubles every 100 rounds up to 0.16,
/// for at most 1000 rounds; if that fails (e.g. a degenerate all-zero
/// layer) the check runs on the best inputs found. The relative error is
/// `|g - fd| / max(|g|, |fd|, 1e-6)`.
pub fn rom_grad_check(params: &RomParams, batch: &[Pair], w_r: f64, w_p: f64, seed: u64) -> Result<GradCheckReport> {
    if batch.is_empty() || batch.len() > 8 {
        return Err(invalid(format!(
            "gradient check needs 1..=8 samples, got {}",
            batch.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = batch.to_vec();
    let mut margins = forward(params, &work).sample_margins(params);
    let mut nudges = 0;
    while margins.iter().any(|&m| m < KINK_MARGIN) && nudges < 1000 {
        // re-draw only the offending samples, keeping any improvement; the
        // box widens when some unit is insensitive to small input changes
        let width = (1e-2 * 2f64.powi((nudges / 100) as i32)).min(0.16);
        nudges += 1;
        let mut trial = work.clone();
        for ((t, orig), m) in trial.iter_mut().zip(batch).zip(&margins) {
            if *m < KINK_MARGIN {
                t.s = [
                    orig.s[0] + width * (rng.random::<f64>() - 0.5),
                    orig.s[1] + width * (rng.random::<f64>() - 0.5),
                ];
            }
        }
        let trial_margins = forward(params, &trial).sample_margins(params);
        for i in 0..work.len() {
            if trial_margins[i] > margins[i] {
                work[i] = trial[i];
                margins[i] = trial_margins[i];
            }
        }
    }
    let margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let (_, _, grad) = rom_loss_grad(params, &work, w_r, w_p)?;
    let mut theta = params.clone();
    let mut worst = (0.0f64, 0usize);
    for (k, &g) in grad.iter().enumerate() {
        let orig = theta.theta[k];
        theta.theta[k] = orig + FD_STEP;
        let up = rom_loss(&theta, &work, w_r, w_p)?;
        theta.theta[k] = orig - FD_STEP;
        let down = rom_loss(&theta, &work, w_r, w_p)?;
        theta.theta[k] = orig;
        let fd = (up - down) / (2.0 * FD_STEP);
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(GRAD_FLOOR);
        if rel > worst.0 || !rel.is_finite() {
            worst = (rel, k);
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst_param: worst.1,
        n_params: params.n_params(),
        nudges,
        min_margin: margin,
        batch: work,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rom::{rom_init, RomSizes};

    fn batch() -> Vec<Pair> {
        vec![
            Pair {
                s: [0.3, -0.2],
                target: [0.1, -0.35],
                tau: 0.5,
            },
            Pair {
                s: [-0.7, 0.1],
                target: [-0.6, 0.5],
                tau: 1.0,
            },
            Pair {
                s: [0.05, 0.6],
                target: [0.5, 0.3],
                tau: 2.0,
            },
            Pair {
                s: [0.9, 0.4],
                target: [0.2, 0.8],
                tau: 4.0,
            },
        ]
    }

    #[test]
    fn fresh_params_pass() {
        let params = rom_init(&RomSizes::with_hidden(64), 11).unwrap();
        let r = rom_grad_check(&params, &batch(), 1.0, 1.0, 0).unwrap();
        assert!(
            r.min_margin >= KINK_MARGIN,
            "{} after {} nudges",
            r.min_margin,
            r.nudges
        );
        assert!(r.max_rel_error < 1e-4, "{} at {}", r.max_rel_error, r.worst_param);
    }

    #[test]
    fn degenerate_decoder_still_reports() {
        let mut params = rom_init(&RomSizes::with_hidden(8), 5).unwrap();
        let start = params.decoder.layers[0].offset;
        for v in &mut params.theta[start..] {
            *v = 0.0;
        }
        let r = rom_grad_check(&params, &batch(), 1.0, 1.0, 0).unwrap();
        assert!(r.max_rel_error.is_finite());
        assert!(rom_grad_check(&params, &[], 1.0, 1.0, 0).is_err());
    }
}
