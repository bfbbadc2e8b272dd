//! Maximum packing of concurrently active transmitters under a network-wide
//! interference budget.
//!
//! Given `N` nodes in the plane and a power-law path loss `ℓ(r) = r^-β`, the
//! packing number is the largest number of nodes that can transmit at once
//! while the squared two-norm of the interference vector `w = Dx` stays below
//! a budget `ε`. This crate computes it three ways:
//!
//! * [`exact`]: branch-and-bound enumeration over subsets (small `N`).
//! * [`sdp`]: a semidefinite relaxation of the `{-1,+1}` reformulation, solved
//!   with a primal-dual interior-point method. Its optimum `ρ` upper-bounds the
//!   packing number.
//! * [`rounding`]: sign rounding of Gaussian samples drawn with the relaxation's
//!   optimal matrix as covariance, giving feasible activations `σ̂ ≤ σ`.
//!
//! [`bounds`] reports the sandwich diagnostics relating these quantities and
//! [`experiments`] drives the Monte Carlo sweeps exposed by the `pack` CLI.

pub mod bounds;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod network;
pub mod problem;
pub mod rounding;
pub mod sdp;
pub mod seed;

mod linalg;

pub use error::{Error, Result};
pub use exact::{solve_exact, ExactResult};
pub use network::{build_instance, generate_uniform, Network, PackingInstance, PathLossModel, Point};
pub use problem::{lift, SpinProblem};
pub use rounding::{round, RoundingOptions, RoundingResult};
pub use sdp::{solve_sdr, SdrSolution, SolveStatus, SolverConfig};
