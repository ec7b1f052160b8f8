//! Local extreme learning machines (locELM) for linear and nonlinear PDEs on
//! rectangular spatial or spatial-temporal domains.
//!
//! The method decomposes the domain into rectangular sub-domains, places one
//! small feed-forward network on each sub-domain (random, fixed hidden
//! coefficients; trainable linear output layer), and enforces the PDE,
//! boundary/initial conditions, and C^k continuity across sub-domain
//! interfaces at collocation points. For linear PDEs this yields one linear
//! least-squares problem solved in the minimum-norm sense; for nonlinear PDEs
//! a nonlinear least-squares problem solved by NLSQ-perturb (randomized
//! restarts around the best iterate) or Newton-LLSQ (Newton steps with
//! least-squares increments). Long-time integration uses block time marching:
//! the time axis is split into uniform blocks and each block's terminal state
//! becomes the next block's initial condition.
//!
//! Modules mirror the pipeline:
//! - [`network`]: per-sub-domain networks and feature jets (values plus first
//!   and pure second derivatives per input dimension).
//! - [`mesh`]: domain partition, sub-domain indexing, collocation sets.
//! - [`assembly`]: problem description and the algebraic system (matrix/rhs,
//!   residual, Jacobian) with tagged rows.
//! - [`solvers`]: minimum-norm least squares, Levenberg-Marquardt,
//!   NLSQ-perturb, Newton-LLSQ.
//! - [`timemarch`]: per-block solves and the block marching driver.
//! - [`problems`]: the seven benchmark problems with manufactured forcing.
//! - [`metrics`]: error reports against exact solutions on evaluation grids.

// Link the system OpenBLAS (provides LAPACK for ndarray-linalg).
extern crate openblas_src as _;

pub mod assembly;
pub mod dual;
mod error;
pub mod mesh;
pub mod metrics;
pub mod network;
pub mod problems;
pub mod solvers;
pub mod timemarch;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
