//! Ensemble off-policy reinforcement learning at desk scale.
//!
//! The crate trains N independently initialized SAC or Q-learning agents on
//! one shared replay buffer, combining three ensemble mechanisms:
//!
//! - bootstrapped updates, gating each member's loss terms with per-transition
//!   Bernoulli masks ([`replay`]);
//! - Bellman backups reweighted by a confidence weight derived from the
//!   disagreement (standard deviation) of the target Q-ensemble ([`sunrise`]);
//! - action selection by upper confidence bound over the Q-ensemble, with a
//!   per-episode random-member alternative and a deterministic evaluation
//!   rule ([`sunrise`]).
//!
//! [`diffcore`] supplies the tensor/autodiff/optimizer substrate, [`envsim`]
//! the desk-scale environments and exact oracles, and [`agents`] the
//! per-member SAC and DQN losses.

pub mod agents;
pub mod diffcore;
pub mod envsim;
pub mod error;
pub mod replay;
pub mod sunrise;

pub use error::{CoreError, Result};
