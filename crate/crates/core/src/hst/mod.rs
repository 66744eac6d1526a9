//! Multi-order scattering transform with the complex activation
//! `i ln R0(z) = arcsin(2z / pi)`.
//!
//! A signal is rescaled into the compact window, activated, then passed
//! through chains of analytic wavelet convolutions and activations along
//! scale-ordered paths, and finally pooled with the low-pass window.

mod activation;
mod filterbank;
mod pca;
mod transform;

pub use activation::{activation, amplitude_shift_check};
pub use filterbank::{build_filterbank, FilterBank};
pub use pca::{pca_spectra, PcaSpectra};
pub use transform::{hst_forward, wick_paths, HstCoefficients, HstOptions, Normalization, PathCoefficients, Pooling};
