//! Cart-pole reinforcement learning from scratch: tabular Q-learning, a DQN
//! built on a hand-written MLP, five exploration-decay schedules, three
//! replay strategies (none / uniform / prioritized with a sum tree), and a
//! seeded, config-driven experiment harness with CSV and SVG outputs.
//!
//! Runs are deterministic: a (config, seed) pair fixes every sampled number
//! through one named counter-based random stream per run. Seed sweeps
//! execute in parallel when the `parallel` feature (default) is enabled.

pub mod dqn;
pub mod env;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mlp;
pub mod replay;
pub mod rng;
pub mod schedules;
pub mod tabular;

pub use error::{Error, Result};
