//! Cubic toy-regression dataset for uncertainty-calibration checks.
//!
//! Twenty samples of `y = x^3 + eps` with `eps ~ N(0, 3^2)`, inputs drawn
//! uniformly from `[-4, 4]`. The bounded training support leaves `|x| in
//! (4, 6]` as an extrapolation region where a healthy bootstrap ensemble
//! should report visibly larger predictive spread.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Default sample count.
pub const TOY_SAMPLES: usize = 20;
/// Training inputs are uniform on `[-TOY_X_RANGE, TOY_X_RANGE]`.
pub const TOY_X_RANGE: f64 = 4.0;
/// Standard deviation of the target noise.
pub const TOY_NOISE_STD: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct RegressionDataset {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// Dataset with the default sample count, support, and noise level.
pub fn toy_regression_make(rng: &mut ChaCha8Rng) -> RegressionDataset {
    toy_regression_with(TOY_SAMPLES, TOY_X_RANGE, TOY_NOISE_STD, rng)
}

pub fn toy_regression_with(
    n: usize,
    x_range: f64,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> RegressionDataset {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.gen_range(-x_range..=x_range);
        let z: f64 = rng.sample(StandardNormal);
        xs.push(x);
        ys.push(x * x * x + noise_std * z);
    }
    RegressionDataset { xs, ys }
}

/// Noise-free variant on an evenly spaced grid: `y = x^3` exactly.
pub fn toy_regression_noiseless(n: usize, x_range: f64) -> RegressionDataset {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for k in 0..n {
        let t = if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
        let x = -x_range + 2.0 * x_range * t;
        xs.push(x);
        ys.push(x * x * x);
    }
    RegressionDataset { xs, ys }
}
