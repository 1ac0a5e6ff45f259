//! Simulation library for recovering bandits.
//!
//! A recovering bandit is a multi-armed bandit whose arm rewards depend on how
//! many rounds have passed since the arm was last pulled. Treating those
//! elapsed-round counters as the state of an MDP lets reinforcement-learning
//! agents plan over the whole horizon. This crate provides:
//!
//! * [`env`]: the capped elapsed-round MDP and the benchmark reward models,
//! * [`sssarsa`]: state-separated SARSA, which learns `K` two-dimensional
//!   Q-tables whose mean recovers the joint Q-function,
//! * [`tabular`]: joint-state Q-learning and SARSA baselines,
//! * [`rgpts`]: Gaussian-process Thompson sampling over discrete states with
//!   `d`-step lookahead,
//! * [`oracle`]: exact value iteration, closed-form optimal policies and
//!   analytic exploration statistics,
//! * [`harness`]: seeded experiment grids, regret accounting, aggregation and
//!   CSV/JSON artifacts.

pub mod env;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod rgpts;
pub mod rng;
pub mod sssarsa;
pub mod tabular;

pub use env::{
    GammaMode, Preset, RewardDistribution, RewardShape, Scenario, ScenarioBuilder, StateVector,
};
pub use error::{Error, Result};
