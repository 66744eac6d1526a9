//! Hamilton-Jacobi-Bellman solvers for one degree of freedom.
//!
//! [`solve_characteristics`] builds the conservative generating function
//! `S_P(q) = int p(q; E) dq` on one momentum branch. [`solve_viscous`]
//! solves the discounted stationary equation `nu V = R + f V'` for the
//! damped gradient flow `f = -V'_bare` by upwind fast sweeping.

mod characteristics;
mod viscous;

pub use characteristics::{
    closed_orbit_integral, hjb_residual, solve_characteristics, Branch, GeneratingFunction, Region,
};
pub use viscous::{solve_viscous, trajectory_value, HjbConfig, ViscousSolution};
