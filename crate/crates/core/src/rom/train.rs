use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rom_init, rom_loss_grad, EpochLoss, Pair, RomParams, RomSizes};
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;

/// Fixed number of gradient shards per minibatch. The shard sums are
/// reduced in shard order whether or not they run in parallel, so both
/// modes produce identical bits.
const GRAD_SHARDS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    /// Cosine decay ends here.
    pub final_learning_rate: f64,
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub epochs: usize,
    pub w_r: f64,
    pub w_p: f64,
    pub taus: Vec<f64>,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 1e-3,
            final_learning_rate: 2e-5,
            batch_size: 128,
            batches_per_epoch: 24,
            epochs: 2000,
            w_r: 1.0,
            w_p: 1.0,
            taus: vec![0.5, 1.0, 2.0, 4.0],
            seed: 0,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.final_learning_rate, self.w_r, self.w_p];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("learning rates and loss weights must be positive"));
        }
        if self.hidden == 0 || self.batch_size == 0 || self.batches_per_epoch == 0 || self.epochs == 0 {
            return Err(invalid(
                "hidden width, batch size, batches per epoch and epochs must be positive",
            ));
        }
        if self.taus.is_empty() || self.taus.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("offsets must be positive and non-empty"));
        }
        Ok(())
    }

    fn learning_rate_at(&self, epoch: usize) -> f64 {
        let t = epoch as f64 / self.epochs as f64;
        self.final_learning_rate + 0.5 * (self.learning_rate - self.final_learning_rate) * (1.0 + (PI * t).cos())
    }
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((w, g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

fn batch_gradient(params: &RomParams, batch: &[Pair], cfg: &TrainConfig) -> Result<(f64, f64, Vec<f64>)> {
    let n = batch.len();
    let shard = n.div_ceil(GRAD_SHARDS);
    let shards: Vec<&[Pair]> = batch.chunks(shard).collect();
    let run = |s: &&[Pair]| rom_loss_grad(params, s, cfg.w_r, cfg.w_p).map(|r| (s.len(), r));
    let parts: Vec<_> = if cfg.parallel {
        shards.par_iter().map(run).collect::<Result<_>>()?
    } else {
        shards.iter().map(run).collect::<Result<_>>()?
    };
    let mut grad = vec![0.0; params.n_params()];
    let (mut recon, mut pred) = (0.0, 0.0);
    for (len, (r, p, g)) in parts {
        let w = len as f64 / n as f64;
        recon += w * r;
        pred += w * p;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += w * gi;
        }
    }
    Ok((recon, pred, grad))
}

/// Trained parameters with the per-epoch loss history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: RomParams,
    pub history: Vec<EpochLoss>,
}

/// Minibatch Adam on `w_r recon + w_p pred` with cosine learning-rate
/// decay. Initialization and batch sampling are seeded from `cfg.seed`.
pub fn rom_train(pairs: &[Pair], cfg: &TrainConfig) -> Result<TrainOutcome> {
    rom_train_with(pairs, cfg, |_| {})
}

/// As [`rom_train`], calling `progress` after every epoch.
pub fn rom_train_with(pairs: &[Pair], cfg: &TrainConfig, mut progress: impl FnMut(&EpochLoss)) -> Result<TrainOutcome> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(invalid("no training pairs"));
    }
    let mut params = rom_init(&RomSizes::with_hidden(cfg.hidden), cfg.seed)?;
    let mut adam = Adam::new(params.n_params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        let (mut recon, mut pred) = (0.0, 0.0);
        for _ in 0..cfg.batches_per_epoch {
            batch.clear();
            batch.extend((0..cfg.batch_size).map(|_| pairs[rng.random_range(0..pairs.len())]));
            let (r, p, grad) = batch_gradient(&params, &batch, cfg)?;
            let loss = cfg.w_r * r + cfg.w_p * p;
            if !loss.is_finite() || loss > 1e6 {
                return Err(Error::TrainingDiverged { epoch, loss, history });
            }
            adam.step(&mut params.theta, &grad, lr);
            recon += r;
            pred += p;
        }
        let k = cfg.batches_per_epoch as f64;
        let entry = EpochLoss {
            epoch,
            loss_recon: recon / k,
            loss_pred: pred / k,
        };
        progress(&entry);
        history.push(entry);
    }
    Ok(TrainOutcome { params, history })
}

pub fn write_history_csv<W: std::io::Write>(history: &[EpochLoss], mut w: W) -> std::io::Result<()> {
    writeln!(w, "epoch,loss_recon,loss_pred")?;
    for e in history {
        writeln!(w, "{},{},{}", e.epoch, fmt_f64(e.loss_recon), fmt_f64(e.loss_pred))?;
    }
    Ok(())
}

/// True if the `window`-epoch moving average of the total loss, sampled
/// every `window` epochs, never increases.
pub fn moving_average_monotone(history: &[EpochLoss], window: usize) -> bool {
    let totals: Vec<f64> = history.iter().map(|e| e.loss_recon + e.loss_pred).collect();
    let means: Vec<f64> = totals
        .chunks_exact(window.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    means.windows(2).all(|w| w[1] <= w[0])
}
