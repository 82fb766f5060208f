//! Simulation and numerical analysis of many-server join-the-shortest-queue
//! systems in heavy traffic.
//!
//! The crate covers four layers:
//!
//! - [`sim`]: exact event-by-event simulation of the M/M/n-JSQ Markov chain
//!   in a counts representation, its barrier-truncated variant, and an
//!   explicit per-queue mode that measures customer waiting times.
//! - [`scaling`] and [`reflection`]: diffusion/fluid scalings of event paths
//!   and the one-sided reflection map used by the limit system.
//! - [`solver`]: driving-noise sampling and a windowed fixed-point solver for
//!   the limiting reflected integral system, with the closed-form
//!   deterministic tail.
//! - [`analysis`] and [`cli`]: martingale reconstruction, hitting-probability
//!   and waiting-time statistics, distribution comparisons, and the
//!   experiment runner behind the `jsq` binary.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod reflection;
pub mod scaling;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
