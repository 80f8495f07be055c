//! Tanh-squashed diagonal Gaussian policy head.
//!
//! Actions are `tanh(mean + std * xi)` with `xi ~ N(0, I)`, so every
//! component lies strictly inside `(-1, 1)`. Log-probabilities include the
//! tanh change-of-variables term, computed through the stable identity
//! `ln(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u))`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffcore::math::softplus;
use crate::diffcore::tensor::Tensor;
use crate::error::{CoreError, Result};

/// Clamp range for the policy's log standard deviation.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.8378770664093453;

/// One reparameterized draw from the squashed policy.
#[derive(Debug, Clone)]
pub struct PolicySample {
    /// `tanh(pre_tanh)`, componentwise in `(-1, 1)`.
    pub action: Tensor,
    /// `mean + std * xi` before squashing.
    pub pre_tanh: Tensor,
    /// Per-row log-density of `action`, shape `(n, 1)`.
    pub log_prob: Tensor,
}

/// Draws one action per row of `mean`/`log_std`.
pub fn sample_squashed(
    mean: &Tensor,
    log_std: &Tensor,
    rng: &mut ChaCha8Rng,
) -> Result<PolicySample> {
    if mean.shape() != log_std.shape() {
        return Err(CoreError::ShapeMismatch {
            context: "sample_squashed".into(),
            expected: format!("{:?}", mean.shape()),
            got: format!("{:?}", log_std.shape()),
        });
    }
    let noise: Vec<f64> = (0..mean.numel())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let noise = Tensor::new(mean.shape().to_vec(), noise)?;
    sample_squashed_with_noise(mean, log_std, &noise)
}

/// Deterministic variant taking the standard-normal noise explicitly.
pub fn sample_squashed_with_noise(
    mean: &Tensor,
    log_std: &Tensor,
    noise: &Tensor,
) -> Result<PolicySample> {
    let (n, d) = (mean.rows(), mean.cols());
    let mut pre = vec![0.0; n * d];
    for i in 0..n * d {
        let s = log_std.data()[i].clamp(LOG_STD_MIN, LOG_STD_MAX);
        pre[i] = mean.data()[i] + s.exp() * noise.data()[i];
    }
    let pre_tanh = Tensor::new(vec![n, d], pre)?;
    let log_prob = squashed_log_prob(&pre_tanh, mean, log_std)?;
    let action = Tensor::new(
        vec![n, d],
        pre_tanh.data().iter().map(|u| u.tanh()).collect(),
    )?;
    Ok(PolicySample {
        action,
        pre_tanh,
        log_prob,
    })
}

/// Log-density of the squashed action whose pre-squash value is `pre_tanh`,
/// under the policy `(mean, log_std)`. Shape `(n, 1)`.
pub fn squashed_log_prob(pre_tanh: &Tensor, mean: &Tensor, log_std: &Tensor) -> Result<Tensor> {
    if pre_tanh.shape() != mean.shape() || mean.shape() != log_std.shape() {
        return Err(CoreError::ShapeMismatch {
            context: "squashed_log_prob".into(),
            expected: format!("{:?}", mean.shape()),
            got: format!("{:?}/{:?}", pre_tanh.shape(), log_std.shape()),
        });
    }
    let (n, d) = (mean.rows(), mean.cols());
    let mut out = vec![0.0; n];
    for r in 0..n {
        let mut lp = -0.5 * d as f64 * LN_2PI;
        for c in 0..d {
            let i = r * d + c;
            let s = log_std.data()[i].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let u = pre_tanh.data()[i];
            let z = (u - mean.data()[i]) * (-s).exp();
            lp += -0.5 * z * z - s;
            lp -= 2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u));
        }
        out[r] = lp;
    }
    Tensor::new(vec![n, 1], out)
}
