//! Learned reduced-order model: an encoder to `(P, cos Q, sin Q)`, an
//! energy network `E(P)` whose slope `omega_Q = dE/dP` advances the angle,
//! and a decoder back to `(q, p)`. Networks and training are implemented
//! here from scratch.

mod data;
mod eval;
mod gradcheck;
mod io;
mod mlp;
mod model;
mod train;

use serde::{Deserialize, Serialize};

pub use data::{make_pairs, pendulum_dataset, phase_space_scale, DatasetConfig};
pub use eval::{evaluate_rom, RomEvaluation};
pub use gradcheck::{rom_grad_check, GradCheckReport, KINK_MARGIN};
pub use io::{load_params, save_params, RomHeader};
pub use mlp::{Layer, Mlp};
pub use model::{
    decode, encode, frequencies, rom_init, rom_loss, rom_loss_grad, rom_predict, rom_predict_many, Latent, Pair,
    RomParams, RomSizes, OMEGA_FD_STEP,
};
pub use train::{moving_average_monotone, rom_train, rom_train_with, write_history_csv, TrainConfig, TrainOutcome};

/// Mean losses of one training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss_recon: f64,
    pub loss_pred: f64,
}
