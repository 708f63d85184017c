//! Accelerated minibatch stochastic gradient methods for smooth, non-negative
//! convex objectives, together with the synthetic problem families and the
//! measurement tools used to check their convergence behaviour.
//!
//! The crate is organised in three layers:
//!
//! - [`problems`]: stochastic objectives `L(w) = E ℓ(w; z)` with a seeded
//!   sampler, per-sample losses and gradients, and certified metadata
//!   (smoothness, minimizer norm, minimum loss, growth constant).
//! - [`optimizers`]: accelerated minibatch SGD with ball projection, plain
//!   projected minibatch SGD, and the restart scheme for objectives with
//!   quadratic growth.
//! - [`analysis`]: run traces, exact least-squares oracles, variance
//!   estimation, rate fitting and minibatch speedup tables.

pub mod analysis;
pub mod digest;
mod error;
pub mod linalg;
pub mod optimizers;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
