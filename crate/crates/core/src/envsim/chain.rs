//! Tabular chain MDP and its exact dynamic-programming oracle.
//!
//! States `0..n` are arranged in a line. Moving right out of the last state
//! terminates the episode; moving left from state 0 stays put. With
//! probability `p_slip` the executed move is the inverse of the chosen one.
//! Rewards come from a `(state, executed direction)` table; the default
//! table pays 1 for the terminal exit and 0 elsewhere. Because the model is
//! exact and tiny, `value_iteration` provides ground-truth Q-values to test
//! learned Q-functions against.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DiscreteEnv, EnvState, StepResult};
use crate::error::{CoreError, Result};

pub const ACTION_LEFT: usize = 0;
pub const ACTION_RIGHT: usize = 1;

/// Where an executed move lands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainOutcome {
    Next(usize),
    Terminal,
}

#[derive(Debug, Clone)]
pub struct ChainMdp {
    pub n_states: usize,
    pub p_slip: f64,
    pub gamma: f64,
    /// `rewards[state][executed direction]`.
    rewards: Vec<[f64; 2]>,
}

impl ChainMdp {
    /// Goal-seeking chain: reward 1 on the terminal right exit, 0 elsewhere.
    pub fn new(n_states: usize, p_slip: f64, gamma: f64) -> Result<Self> {
        let mut rewards = vec![[0.0; 2]; n_states.max(1)];
        rewards[n_states.max(1) - 1][ACTION_RIGHT] = 1.0;
        Self::with_rewards(n_states, p_slip, gamma, rewards)
    }

    /// Chain with an explicit reward table.
    pub fn with_rewards(
        n_states: usize,
        p_slip: f64,
        gamma: f64,
        rewards: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(CoreError::Invalid("chain needs at least one state".into()));
        }
        if !(0.0..=1.0).contains(&p_slip) {
            return Err(CoreError::OutOfRange {
                what: "p_slip",
                value: p_slip,
                range: "[0, 1]",
            });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(CoreError::OutOfRange {
                what: "gamma",
                value: gamma,
                range: "[0, 1)",
            });
        }
        if rewards.len() != n_states {
            return Err(CoreError::ShapeMismatch {
                context: "chain reward table".into(),
                expected: format!("{n_states}"),
                got: format!("{}", rewards.len()),
            });
        }
        Ok(ChainMdp {
            n_states,
            p_slip,
            gamma,
            rewards,
        })
    }

    pub const N_ACTIONS: usize = 2;

    /// Deterministic effect of executing (not merely intending) a move.
    fn execute(&self, state: usize, direction: usize) -> ChainOutcome {
        match direction {
            ACTION_LEFT => ChainOutcome::Next(state.saturating_sub(1)),
            _ => {
                if state + 1 == self.n_states {
                    ChainOutcome::Terminal
                } else {
                    ChainOutcome::Next(state + 1)
                }
            }
        }
    }

    pub fn reward(&self, state: usize, direction: usize) -> f64 {
        self.rewards[state][direction]
    }

    /// Transition distribution for `(state, action)` as
    /// `[(probability, outcome, reward); 2]`. Probabilities sum to 1.
    pub fn transitions(
        &self,
        state: usize,
        action: usize,
    ) -> Result<[(f64, ChainOutcome, f64); 2]> {
        self.check_indices(state, action)?;
        Ok([
            (
                1.0 - self.p_slip,
                self.execute(state, action),
                self.reward(state, action),
            ),
            (
                self.p_slip,
                self.execute(state, 1 - action),
                self.reward(state, 1 - action),
            ),
        ])
    }

    /// Samples one step. Returns `(outcome, reward)`.
    pub fn step(
        &self,
        state: usize,
        action: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(ChainOutcome, f64)> {
        self.check_indices(state, action)?;
        let slip = rng.gen::<f64>() < self.p_slip;
        let direction = if slip { 1 - action } else { action };
        Ok((self.execute(state, direction), self.reward(state, direction)))
    }

    fn check_indices(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.n_states {
            return Err(CoreError::IndexOutOfRange {
                what: "chain state",
                index: state,
                size: self.n_states,
            });
        }
        if action >= Self::N_ACTIONS {
            return Err(CoreError::IndexOutOfRange {
                what: "chain action",
                index: action,
                size: Self::N_ACTIONS,
            });
        }
        Ok(())
    }

    /// One-hot encoding of a state, the observation used by tabular Q-nets.
    pub fn one_hot(&self, state: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states];
        v[state] = 1.0;
        v
    }
}

/// Solves the Bellman optimality equation by fixed-point iteration.
///
/// Returns `Q*[state][action]` with sup-norm Bellman residual below `tol`.
pub fn value_iteration(mdp: &ChainMdp, tol: f64) -> Vec<[f64; 2]> {
    let n = mdp.n_states;
    let mut q = vec![[0.0f64; 2]; n];
    loop {
        let mut next = vec![[0.0f64; 2]; n];
        let mut residual: f64 = 0.0;
        for s in 0..n {
            for a in 0..ChainMdp::N_ACTIONS {
                let backup = backup_value(mdp, &q, s, a);
                next[s][a] = backup;
                residual = residual.max((backup - q[s][a]).abs());
            }
        }
        q = next;
        if residual < tol {
            return q;
        }
    }
}

/// Sup-norm of `Q - T Q`, the optimality-equation defect of a candidate table.
pub fn bellman_residual(mdp: &ChainMdp, q: &[[f64; 2]]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..mdp.n_states {
        for a in 0..ChainMdp::N_ACTIONS {
            worst = worst.max((backup_value(mdp, q, s, a) - q[s][a]).abs());
        }
    }
    worst
}

fn backup_value(mdp: &ChainMdp, q: &[[f64; 2]], s: usize, a: usize) -> f64 {
    let mut backup = 0.0;
    for (p, outcome, r) in mdp.transitions(s, a).expect("valid indices") {
        if p == 0.0 {
            continue;
        }
        let future = match outcome {
            ChainOutcome::Terminal => 0.0,
            ChainOutcome::Next(s2) => q[s2][0].max(q[s2][1]),
        };
        backup += p * (r + mdp.gamma * future);
    }
    backup
}

/// Episode wrapper around `ChainMdp` with one-hot observations.
pub struct ChainEnv {
    pub mdp: ChainMdp,
    state: usize,
    step_index: usize,
    done: bool,
    /// Episodes are cut off after this many steps even without termination.
    pub max_steps: usize,
}

impl ChainEnv {
    pub fn new(mdp: ChainMdp, max_steps: usize) -> Self {
        ChainEnv {
            mdp,
            state: 0,
            step_index: 0,
            done: false,
            max_steps,
        }
    }
}

impl DiscreteEnv for ChainEnv {
    fn obs_dim(&self) -> usize {
        self.mdp.n_states
    }

    fn n_actions(&self) -> usize {
        ChainMdp::N_ACTIONS
    }

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> EnvState {
        self.state = 0;
        self.step_index = 0;
        self.done = false;
        EnvState {
            observation: self.mdp.one_hot(0),
            done: false,
            step_index: 0,
        }
    }

    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Result<StepResult> {
        if self.done {
            return Err(CoreError::EpisodeDone);
        }
        let (outcome, reward) = self.mdp.step(self.state, action, rng)?;
        self.step_index += 1;
        let terminal = matches!(outcome, ChainOutcome::Terminal);
        if let ChainOutcome::Next(s2) = outcome {
            self.state = s2;
        }
        self.done = terminal || self.step_index >= self.max_steps;
        Ok(StepResult {
            next_observation: self.mdp.one_hot(self.state),
            reward,
            done: self.done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn deterministic_moves_without_slip() {
        let mdp = ChainMdp::new(5, 0.0, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (o, r) = mdp.step(0, ACTION_RIGHT, &mut rng).unwrap();
        assert_eq!(o, ChainOutcome::Next(1));
        assert_eq!(r, 0.0);
        let (o, _) = mdp.step(0, ACTION_LEFT, &mut rng).unwrap();
        assert_eq!(o, ChainOutcome::Next(0));
        let (o, r) = mdp.step(4, ACTION_RIGHT, &mut rng).unwrap();
        assert_eq!(o, ChainOutcome::Terminal);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn full_slip_inverts_actions_deterministically() {
        let mdp = ChainMdp::new(5, 1.0, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (o, _) = mdp.step(2, ACTION_RIGHT, &mut rng).unwrap();
        assert_eq!(o, ChainOutcome::Next(1));
        let (o, _) = mdp.step(2, ACTION_LEFT, &mut rng).unwrap();
        assert_eq!(o, ChainOutcome::Next(3));
    }

    #[test]
    fn empirical_slip_frequency_matches_table() {
        let mdp = ChainMdp::new(4, 0.3, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100_000;
        let mut right = 0u32;
        for _ in 0..n {
            if let (ChainOutcome::Next(2), _) = mdp.step(1, ACTION_RIGHT, &mut rng).unwrap() {
                right += 1;
            }
        }
        let freq = f64::from(right) / n as f64;
        assert!((freq - 0.7).abs() < 0.01, "freq = {freq}");
    }

    #[test]
    fn transition_rows_are_probability_distributions() {
        for p_slip in [0.0, 0.25, 0.5, 1.0] {
            let mdp = ChainMdp::new(6, p_slip, 0.95).unwrap();
            for s in 0..6 {
                for a in 0..2 {
                    let total: f64 = mdp
                        .transitions(s, a)
                        .unwrap()
                        .iter()
                        .map(|(p, _, _)| p)
                        .sum();
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_state_self_loop_is_a_geometric_series() {
        // Reward 1 every step; looping left forever earns 1/(1 - gamma) = 10.
        let mdp = ChainMdp::with_rewards(1, 0.0, 0.9, vec![[1.0, 1.0]]).unwrap();
        let q = value_iteration(&mdp, 1e-10);
        assert!((q[0][ACTION_LEFT] - 10.0).abs() < 1e-7, "{:?}", q);
        // The right move terminates, so it collects the single reward only.
        assert!((q[0][ACTION_RIGHT] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let mdp = ChainMdp::with_rewards(4, 0.2, 0.9, vec![[0.0; 2]; 4]).unwrap();
        let q = value_iteration(&mdp, 1e-12);
        assert!(q.iter().all(|row| row[0] == 0.0 && row[1] == 0.0));
    }

    #[test]
    fn five_state_chain_hand_unrolled() {
        let mdp = ChainMdp::new(5, 0.0, 0.9).unwrap();
        let q = value_iteration(&mdp, 1e-12);
        // Right from s0 reaches the rewarded terminal move after four more rights.
        assert!((q[0][ACTION_RIGHT] - 0.9f64.powi(4)).abs() < 1e-10);
        assert!((q[4][ACTION_RIGHT] - 1.0).abs() < 1e-12);
        assert!(bellman_residual(&mdp, &q) < 1e-10);
    }

    #[test]
    fn env_roundtrip_reaches_goal() {
        let mdp = ChainMdp::new(3, 0.0, 0.9).unwrap();
        let mut env = ChainEnv::new(mdp, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s0 = env.reset(&mut rng);
        assert_eq!(s0.observation, vec![1.0, 0.0, 0.0]);
        env.step(ACTION_RIGHT, &mut rng).unwrap();
        env.step(ACTION_RIGHT, &mut rng).unwrap();
        let last = env.step(ACTION_RIGHT, &mut rng).unwrap();
        assert!(last.done);
        assert_eq!(last.reward, 1.0);
        assert!(env.step(ACTION_RIGHT, &mut rng).is_err());
    }

    #[test]
    fn out_of_range_indices_error() {
        let mdp = ChainMdp::new(3, 0.0, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(mdp.step(3, 0, &mut rng).is_err());
        assert!(mdp.step(0, 2, &mut rng).is_err());
    }
}
