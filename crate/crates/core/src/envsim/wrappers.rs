//! Reward-shaping wrappers over continuous environments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ContinuousEnv, EnvState, StepResult};
use crate::error::{CoreError, Result};

/// Replaces the dense swing-up reward with a sparse near-upright indicator.
///
/// Requires the inner environment to emit the dense reward
/// `(1 + cos(theta)) / 2`, from which `cos(theta) = 2 r - 1` is recovered
/// exactly; the sparse reward is 1 when `cos(theta) > 0.95` and 0 otherwise.
/// The threshold is tight enough that random policies essentially never
/// trigger it.
pub struct SparseReward<E> {
    inner: E,
}

impl<E: ContinuousEnv> SparseReward<E> {
    pub fn new(inner: E) -> Self {
        SparseReward { inner }
    }
}

impl<E: ContinuousEnv> ContinuousEnv for SparseReward<E> {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> EnvState {
        self.inner.reset(rng)
    }

    fn step(&mut self, action: &[f64], rng: &mut ChaCha8Rng) -> Result<StepResult> {
        let mut res = self.inner.step(action, rng)?;
        let cos_theta = 2.0 * res.reward - 1.0;
        res.reward = if cos_theta > 0.95 { 1.0 } else { 0.0 };
        Ok(res)
    }

    fn set_eval_mode(&mut self, eval: bool) {
        self.inner.set_eval_mode(eval);
    }
}

/// Adds `N(0, sigma^2)` noise to training rewards.
///
/// Evaluation mode bypasses the noise entirely so that reported returns are
/// the deterministic ground-truth reward.
pub struct NoisyReward<E> {
    inner: E,
    sigma: f64,
    eval_mode: bool,
}

impl<E: ContinuousEnv> NoisyReward<E> {
    pub fn new(inner: E, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(CoreError::OutOfRange {
                what: "noise sigma",
                value: sigma,
                range: ">= 0",
            });
        }
        Ok(NoisyReward {
            inner,
            sigma,
            eval_mode: false,
        })
    }
}

impl<E: ContinuousEnv> ContinuousEnv for NoisyReward<E> {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> EnvState {
        self.inner.reset(rng)
    }

    fn step(&mut self, action: &[f64], rng: &mut ChaCha8Rng) -> Result<StepResult> {
        let mut res = self.inner.step(action, rng)?;
        if !self.eval_mode {
            let z: f64 = rng.sample(StandardNormal);
            res.reward += self.sigma * z;
        }
        Ok(res)
    }

    fn set_eval_mode(&mut self, eval: bool) {
        self.eval_mode = eval;
        self.inner.set_eval_mode(eval);
    }
}
