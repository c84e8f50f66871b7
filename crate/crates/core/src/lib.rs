//! A laboratory for tabular average-reward reinforcement learning.
//!
//! The crate bundles
//! - exact MDP analytics ([`mdp`]): gain, bias, optimality, diameter, mixing
//!   time and the variance of the optimal bias,
//! - KL-divergence geometry on the simplex ([`kl`]) used by optimistic planners,
//! - transportation-type concentration inequalities and an empirical
//!   certification harness ([`concentration`]),
//! - benchmark and hard-instance environments ([`envs`]),
//! - the KL-UCRL and UCRL2 learners plus an oracle ([`agents`]),
//! - a regret simulation harness with CSV/JSON output ([`harness`]),
//! - the `klucrl-lab` command line ([`cli`]).
//!
//! Runnable walkthroughs live in `examples/`.

pub mod agents;
pub mod cli;
pub mod concentration;
pub mod envs;
pub mod error;
pub mod harness;
pub mod kl;
pub mod mdp;

pub use error::{Error, Result};
