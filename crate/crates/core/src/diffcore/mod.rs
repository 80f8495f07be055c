//! Minimal dense differentiable-computation engine.
//!
//! Provides the pieces every agent in this crate is built from: `Tensor`
//! storage, a recording `GradTape` with reverse-mode accumulation, MLP
//! parameters with Adam state, a tanh-squashed Gaussian policy head, and a
//! finite-difference gradient checker. Everything runs in `f64`; nets here
//! are small enough that reproducibility beats throughput.

pub mod gaussian;
pub mod gradcheck;
pub mod math;
pub mod mlp;
pub mod tape;
pub mod tensor;

pub use gaussian::{
    sample_squashed, sample_squashed_with_noise, squashed_log_prob, PolicySample, LOG_STD_MAX,
    LOG_STD_MIN,
};
pub use gradcheck::grad_check;
pub use mlp::{LayerParams, MlpBinding, MlpGrads, MlpParams, OptimConfig};
pub use tape::{GradTape, GradientSet, NodeId};
pub use tensor::Tensor;
