//! Couplings of two multivariate discrete distributions with controlled
//! strength of dependence.
//!
//! Given two weighted atom clouds `P` on `R^I` and `Q` on `R^J`, this crate
//! solves the entropy-penalized correlation maximization problem
//!
//! ```text
//! W(M, T) = max over couplings pi of  E_pi[X' M Y] + T * Ent(pi)
//! ```
//!
//! by iterative proportional fitting in the log domain, solves the exact
//! (`T = 0`) problem by a transportation simplex, fits the affinity matrix
//! reproducing an observed cross-covariance at `T = 1`, traces temperature
//! trajectories of increasing dependence, maps the geometry of the set of
//! attainable cross-covariance matrices, tests conic-order maximality, and
//! carries the portfolio stress-test, rainbow-option pricing and saliency
//! applications built on top.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature
//! (on by default) only switches float math to the platform intrinsics and
//! enables `std::error::Error` impls.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod affinity;
pub mod covset;
pub mod finance;
pub mod marginals;
pub mod maximality;
pub mod transport;

mod fmath;

pub use affinity::{AffinityMatrix, FitOptions, FitResult, TrajectoryPoint};
pub use marginals::{DiscreteMarginal, OptionMarginalSpec};
pub use transport::{Coupling, CrossCovariance, IpfpOptions};
