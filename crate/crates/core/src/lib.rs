//! Height-constrained two-board rectangle packing.
//!
//! The crate provides a deterministic packing environment ([`env`]), classical packing
//! heuristics ([`heuristics`]), a small hand-differentiated actor-critic network
//! ([`neural`]), an on-policy trainer for PPO and A2C ([`rl`]), and the experiment harness
//! that ties them together ([`experiments`]).

pub mod cli;
pub mod env;
pub mod error;
pub mod experiments;
pub mod heuristics;
pub mod neural;
pub mod rl;

pub use error::{Error, Result};
