//! Desk-scale environments and data generators.
//!
//! A continuous cart-pole swing-up task with sparse-reward and noisy-reward
//! wrappers, a tabular chain MDP with an exact value-iteration oracle for the
//! discrete path, and the cubic toy-regression dataset used to sanity-check
//! ensemble uncertainty. Environments are deterministic functions of
//! `(state, action, rng stream)`: replaying a seed replays the trajectory.

pub mod cartpole;
pub mod chain;
pub mod toyreg;
pub mod wrappers;

use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Snapshot returned by `reset`.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub done: bool,
    pub step_index: usize,
}

/// Outcome of one environment step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub next_observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Continuous-action environment with actions in `[-1, 1]^action_dim`.
///
/// `done`, once returned true, persists until `reset`; stepping a finished
/// episode is a contract violation.
pub trait ContinuousEnv {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> EnvState;
    fn step(&mut self, action: &[f64], rng: &mut ChaCha8Rng) -> Result<StepResult>;

    /// Evaluation mode disables training-only reward perturbations.
    /// The base environments have none, so the default is a no-op.
    fn set_eval_mode(&mut self, _eval: bool) {}
}

/// Discrete-action environment over indexed actions.
pub trait DiscreteEnv {
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> EnvState;
    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Result<StepResult>;
}

pub use cartpole::{CartpoleParams, CartpoleSwingup};
pub use chain::{value_iteration, ChainEnv, ChainMdp, ACTION_LEFT, ACTION_RIGHT};
pub use toyreg::{toy_regression_make, toy_regression_noiseless, toy_regression_with, RegressionDataset};
pub use wrappers::{NoisyReward, SparseReward};
