//! Certified lower bounds on the mu-conductance profile of a graph, computed
//! from KKT points of a low-rank semidefinite relaxation, together with the
//! empirical (upper) side of the network community profile.
//!
//! The pipeline for one `mu`:
//!
//! 1. [`lrsdp::alm_solve`] finds a KKT point `(Y, s, multipliers)` of the
//!    rank-`k` program with an augmented Lagrangian outer loop and a
//!    bound-constrained L-BFGS inner solver.
//! 2. [`certify::dual_slack_operator`] assembles
//!    `Z = L - lambda D - beta d d^T - Diag(gamma)` from the multipliers and
//!    [`certify::compute_theta`] measures how far it is from being PSD.
//! 3. [`certify::theorem1_bound`] turns the objective and that violation into
//!    a lower bound on `phi_mu(G)`.

pub mod certify;
pub mod dense;
pub mod eig;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod graphgen;
pub mod lrsdp;
pub mod ncp;
pub mod oracle;

pub use error::{Error, Result};
pub use graph::{Graph, VertexSet};
