use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{DiffTape, Mlp, Tape};
use crate::dynamics::PhaseState;
use crate::error::{invalid, Result};

/// Step of the centred difference giving `omega_Q = dE/dP`.
pub const OMEGA_FD_STEP: f64 = 1e-4;

/// Layer widths of the three networks, input first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RomSizes {
    pub encoder: Vec<usize>,
    pub energy: Vec<usize>,
    pub decoder: Vec<usize>,
}

impl RomSizes {
    /// Two hidden layers of `width` in every network.
    pub fn with_hidden(width: usize) -> Self {
        Self {
            encoder: vec![2, width, width, 3],
            energy: vec![1, width, width, 1],
            decoder: vec![3, width, width, 2],
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &str, sizes: &[usize], input: usize, output: usize| {
            if sizes.len() < 2 || sizes.contains(&0) {
                return Err(invalid(format!("{name} needs at least two non-zero layer sizes")));
            }
            if sizes[0] != input || sizes[sizes.len() - 1] != output {
                return Err(invalid(format!(
                    "{name} must map {input} -> {output}, got {} -> {}",
                    sizes[0],
                    sizes[sizes.len() - 1]
                )));
            }
            Ok(())
        };
        check("encoder", &self.encoder, 2, 3)?;
        check("energy network", &self.energy, 1, 1)?;
        check("decoder", &self.decoder, 3, 2)
    }
}

/// Encoder `(q, p) -> (P, cos Q, sin Q)`, energy network `P -> E` and
/// decoder `(P, cos Q, sin Q) -> (q, p)`, sharing one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomParams {
    pub sizes: RomSizes,
    pub seed: u64,
    pub encoder: Mlp,
    pub energy: Mlp,
    pub decoder: Mlp,
    pub theta: Vec<f64>,
}

/// One training example: `s` at `t` and `target` at `t + tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub s: [f64; 2],
    pub target: [f64; 2],
    pub tau: f64,
}

impl RomParams {
    pub fn from_theta(sizes: RomSizes, seed: u64, theta: Vec<f64>) -> Result<Self> {
        sizes.validate()?;
        let encoder = Mlp::new(&sizes.encoder, 0);
        let energy = Mlp::new(&sizes.energy, encoder.n_params());
        let decoder = Mlp::new(&sizes.decoder, encoder.n_params() + energy.n_params());
        let n = encoder.n_params() + energy.n_params() + decoder.n_params();
        if theta.len() != n {
            return Err(invalid(format!("expected {n} parameters, got {}", theta.len())));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        Ok(Self {
            sizes,
            seed,
            encoder,
            energy,
            decoder,
            theta,
        })
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }
}

/// Deterministic He initialization from `seed`.
pub fn rom_init(sizes: &RomSizes, seed: u64) -> Result<RomParams> {
    sizes.validate()?;
    let encoder = Mlp::new(&sizes.encoder, 0);
    let energy = Mlp::new(&sizes.energy, encoder.n_params());
    let decoder = Mlp::new(&sizes.decoder, encoder.n_params() + energy.n_params());
    let mut theta = vec![0.0; encoder.n_params() + energy.n_params() + decoder.n_params()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    encoder.init(&mut theta, &mut rng);
    energy.init(&mut theta, &mut rng);
    decoder.init(&mut theta, &mut rng);
    RomParams::from_theta(sizes.clone(), seed, theta)
}

/// Latent state `(P, cos Q, sin Q)` plus the raw pair before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latent {
    pub p: f64,
    pub cos_q: f64,
    pub sin_q: f64,
}

impl Latent {
    pub fn angle(&self) -> f64 {
        self.sin_q.atan2(self.cos_q)
    }

    /// Rotation of the angle pair by `phi`.
    pub fn rotated(&self, phi: f64) -> Self {
        if phi == 0.0 {
            return *self;
        }
        let (s, c) = phi.sin_cos();
        Self {
            p: self.p,
            cos_q: self.cos_q * c - self.sin_q * s,
            sin_q: self.cos_q * s + self.sin_q * c,
        }
    }
}

/// Everything the backward pass needs from one batch.
pub(crate) struct Forward {
    pub batch: usize,
    pub enc: Tape,
    pub raw_r: Vec<f64>,
    pub latent: Vec<Latent>,
    pub rec: Tape,
    pub energy: Tape,
    pub energy_diff: DiffTape,
    pub omega: Vec<f64>,
    pub rotated: Vec<Latent>,
    pub pred: Tape,
}

impl Forward {
    /// Smallest hidden `|pre-activation|` touched by each sample, over
    /// all four network evaluations.
    pub fn sample_margins(&self, p: &RomParams) -> Vec<f64> {
        let n = self.batch;
        let enc = p.encoder.hidden_margins(&self.enc);
        let rec = p.decoder.hidden_margins(&self.rec);
        let pred = p.decoder.hidden_margins(&self.pred);
        let energy = p.energy.hidden_margins(&self.energy);
        (0..n)
            .map(|i| enc[i].min(rec[i]).min(pred[i]).min(energy[i]).min(energy[n + i]))
            .collect()
    }
}

fn latent_input(l: &[Latent]) -> Vec<f64> {
    l.iter().flat_map(|l| [l.p, l.cos_q, l.sin_q]).collect()
}

pub(crate) fn encode_batch(params: &RomParams, states: &[[f64; 2]]) -> (Tape, Vec<f64>, Vec<Latent>) {
    let x: Vec<f64> = states.iter().flatten().copied().collect();
    let enc = params.encoder.forward(&params.theta, &x, states.len());
    let out = enc.output();
    let mut raw_r = Vec::with_capacity(states.len());
    let latent = out
        .chunks_exact(3)
        .map(|o| {
            let r = o[1].hypot(o[2]);
            raw_r.push(r);
            Latent {
                p: o[0],
                cos_q: o[1] / r,
                sin_q: o[2] / r,
            }
        })
        .collect();
    (enc, raw_r, latent)
}

/// `omega_Q(P)` for each latent: the centred difference
/// `(E(P + h) - E(P - h)) / 2h`, evaluated by difference propagation.
fn omega_batch(params: &RomParams, latent: &[Latent]) -> (Tape, DiffTape, Vec<f64>) {
    let b = latent.len();
    let h = OMEGA_FD_STEP;
    let x: Vec<f64> = latent
        .iter()
        .map(|l| l.p + h)
        .chain(latent.iter().map(|l| l.p - h))
        .collect();
    let tape = params.energy.forward(&params.theta, &x, 2 * b);
    let diff = params.energy.difference(&params.theta, &tape, &vec![2.0 * h; b]);
    let omega = diff.dy.iter().map(|d| d / (2.0 * h)).collect();
    (tape, diff, omega)
}

pub(crate) fn forward(params: &RomParams, batch: &[Pair]) -> Forward {
    let n = batch.len();
    let states: Vec<[f64; 2]> = batch.iter().map(|p| p.s).collect();
    let (enc, raw_r, latent) = encode_batch(params, &states);
    let rec = params.decoder.forward(&params.theta, &latent_input(&latent), n);
    let (energy, energy_diff, omega) = omega_batch(params, &latent);
    let rotated: Vec<Latent> = latent
        .iter()
        .zip(&omega)
        .zip(batch)
        .map(|((l, w), p)| l.rotated(w * p.tau))
        .collect();
    let pred = params.decoder.forward(&params.theta, &latent_input(&rotated), n);
    Forward {
        batch: n,
        enc,
        raw_r,
        latent,
        rec,
        energy,
        energy_diff,
        omega,
        rotated,
        pred,
    }
}

/// Mean squared reconstruction and prediction errors of a forward pass.
pub(crate) fn losses(f: &Forward, batch: &[Pair]) -> (f64, f64) {
    let n = f.batch as f64;
    let sq = |out: &[f64], t: &[f64; 2]| (out[0] - t[0]).powi(2) + (out[1] - t[1]).powi(2);
    let recon = f
        .rec
        .output()
        .chunks_exact(2)
        .zip(batch)
        .map(|(o, p)| sq(o, &p.s))
        .sum::<f64>()
        / n;
    let pred = f
        .pred
        .output()
        .chunks_exact(2)
        .zip(batch)
        .map(|(o, p)| sq(o, &p.target))
        .sum::<f64>()
        / n;
    (recon, pred)
}

/// Adds `d(w_r recon + w_p pred)/d theta` into `grad`.
pub(crate) fn backward(params: &RomParams, f: &Forward, batch: &[Pair], w_r: f64, w_p: f64, grad: &mut [f64]) {
    let n = f.batch;
    let scale = 2.0 / n as f64;
    let d_rec: Vec<f64> = f
        .rec
        .output()
        .chunks_exact(2)
        .zip(batch)
        .flat_map(|(o, p)| [scale * w_r * (o[0] - p.s[0]), scale * w_r * (o[1] - p.s[1])])
        .collect();
    let d_pred: Vec<f64> = f
        .pred
        .output()
        .chunks_exact(2)
        .zip(batch)
        .flat_map(|(o, p)| [scale * w_p * (o[0] - p.target[0]), scale * w_p * (o[1] - p.target[1])])
        .collect();
    let d_lat_rec = params.decoder.backward(&params.theta, &f.rec, &d_rec, grad);
    let d_lat_pred = params.decoder.backward(&params.theta, &f.pred, &d_pred, grad);

    let h = OMEGA_FD_STEP;
    let mut d_p = vec![0.0; n];
    let mut d_c = vec![0.0; n];
    let mut d_s = vec![0.0; n];
    let mut d_dy = vec![0.0; n];
    for i in 0..n {
        let r = &f.rotated[i];
        let (dp_r, dc_r, ds_r) = (d_lat_pred[3 * i], d_lat_pred[3 * i + 1], d_lat_pred[3 * i + 2]);
        let phi = f.omega[i] * batch[i].tau;
        let (sn, cs) = phi.sin_cos();
        d_p[i] = d_lat_rec[3 * i] + dp_r;
        d_c[i] = d_lat_rec[3 * i + 1] + dc_r * cs + ds_r * sn;
        d_s[i] = d_lat_rec[3 * i + 2] - dc_r * sn + ds_r * cs;
        let d_phi = -dc_r * r.sin_q + ds_r * r.cos_q;
        let d_omega = d_phi * batch[i].tau;
        d_dy[i] = d_omega / (2.0 * h);
    }
    let dx = vec![2.0 * h; n];
    let inject = params
        .energy
        .difference_backward(&params.theta, &f.energy, &f.energy_diff, &dx, &d_dy, grad);
    // omega depends on P only through units with a kink inside [P - h, P + h]
    let d_e_in = match inject {
        Some(inj) => params
            .energy
            .backward_with(&params.theta, &f.energy, &vec![0.0; 2 * n], Some(&inj), grad),
        None => vec![0.0; 2 * n],
    };
    let mut d_enc = vec![0.0; 3 * n];
    for i in 0..n {
        let l = &f.latent[i];
        let r = f.raw_r[i];
        let cross = d_c[i] * l.sin_q - d_s[i] * l.cos_q;
        d_enc[3 * i] = d_p[i] + d_e_in[i] + d_e_in[n + i];
        d_enc[3 * i + 1] = l.sin_q * cross / r;
        d_enc[3 * i + 2] = -l.cos_q * cross / r;
    }
    params.encoder.backward(&params.theta, &f.enc, &d_enc, grad);
}

/// Weighted loss `w_r recon + w_p pred` on `batch`.
pub fn rom_loss(params: &RomParams, batch: &[Pair], w_r: f64, w_p: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let (r, p) = losses(&forward(params, batch), batch);
    Ok(w_r * r + w_p * p)
}

/// Loss and its gradient.
pub fn rom_loss_grad(params: &RomParams, batch: &[Pair], w_r: f64, w_p: f64) -> Result<(f64, f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let f = forward(params, batch);
    let (r, p) = losses(&f, batch);
    let mut grad = vec![0.0; params.n_params()];
    backward(params, &f, batch, w_r, w_p, &mut grad);
    Ok((r, p, grad))
}

pub fn encode(params: &RomParams, states: &[PhaseState]) -> Vec<Latent> {
    let s: Vec<[f64; 2]> = states.iter().map(|s| [s.q, s.p]).collect();
    encode_batch(params, &s).2
}

pub fn decode(params: &RomParams, latent: &[Latent]) -> Vec<[f64; 2]> {
    let tape = params
        .decoder
        .forward(&params.theta, &latent_input(latent), latent.len());
    tape.output().chunks_exact(2).map(|o| [o[0], o[1]]).collect()
}

/// `omega_Q = dE/dP` at each latent.
pub fn frequencies(params: &RomParams, latent: &[Latent]) -> Vec<f64> {
    omega_batch(params, latent).2
}

/// Advances `s` by `tau`: encode, rotate the angle by `omega_Q(P) tau`,
/// decode. With `tau = 0` this is exactly the autoencoder.
pub fn rom_predict(params: &RomParams, s: PhaseState, tau: f64) -> PhaseState {
    rom_predict_many(params, &[s], tau)[0]
}

pub fn rom_predict_many(params: &RomParams, states: &[PhaseState], tau: f64) -> Vec<PhaseState> {
    let latent = encode(params, states);
    let omega = frequencies(params, &latent);
    let moved: Vec<Latent> = latent.iter().zip(&omega).map(|(l, w)| l.rotated(w * tau)).collect();
    decode(params, &moved)
        .into_iter()
        .zip(states)
        .map(|(o, s)| PhaseState::new(o[0], o[1], s.tau + tau))
        .collect()
}
