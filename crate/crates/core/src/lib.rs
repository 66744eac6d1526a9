//! Characterization and control of one-degree-of-freedom Hamiltonian
//! systems: equilibria and separatrices, symplectic dynamics, control
//! policies, Hamilton-Jacobi-Bellman solvers, a complex-activation
//! scattering transform and a learned reduced-order model.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod hjb;
pub mod hst;
pub mod io;
pub mod models;
pub mod quadrature;
pub mod rom;

pub use dynamics::{integrate, IntegratorConfig, PhaseState, Scheme, Trajectory};
pub use equilibria::{Equilibrium, EquilibriumKind, Rect};
pub use error::{Error, Result};
pub use models::{model_by_id, ModelSpec};
