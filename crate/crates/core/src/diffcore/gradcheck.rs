//! Central finite-difference verification of analytic gradients.

use crate::diffcore::mlp::{MlpGrads, MlpParams};
use crate::error::Result;

/// Compares `analytic` against central finite differences of `loss_fn`.
///
/// Every scalar parameter of `params` is perturbed by `±eps` in turn;
/// the returned value is the maximum over parameters of
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
///
/// `loss_fn` must be deterministic given the parameters: fix any sampling
/// noise before calling.
pub fn grad_check<F>(
    params: &MlpParams,
    analytic: &MlpGrads,
    mut loss_fn: F,
    eps: f64,
) -> Result<f64>
where
    F: FnMut(&MlpParams) -> Result<f64>,
{
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for layer in 0..params.layers().len() {
        for which in 0..2 {
            let len = if which == 0 {
                params.layers()[layer].w.numel()
            } else {
                params.layers()[layer].b.numel()
            };
            for i in 0..len {
                let base = read(params, layer, which, i);
                write(&mut probe, layer, which, i, base + eps);
                let up = loss_fn(&probe)?;
                write(&mut probe, layer, which, i, base - eps);
                let down = loss_fn(&probe)?;
                write(&mut probe, layer, which, i, base);

                let numeric = (up - down) / (2.0 * eps);
                let a = if which == 0 {
                    analytic.layers[layer].0.data()[i]
                } else {
                    analytic.layers[layer].1.data()[i]
                };
                let denom = (a.abs() + numeric.abs()).max(1e-8);
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
    }
    Ok(worst)
}

fn read(params: &MlpParams, layer: usize, which: usize, i: usize) -> f64 {
    if which == 0 {
        params.layers()[layer].w.data()[i]
    } else {
        params.layers()[layer].b.data()[i]
    }
}

fn write(params: &mut MlpParams, layer: usize, which: usize, i: usize, v: f64) {
    let layers = params.layers_mut();
    if which == 0 {
        layers[layer].w.data_mut()[i] = v;
    } else {
        layers[layer].b.data_mut()[i] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::mlp::LayerParams;
    use crate::diffcore::tape::GradTape;
    use crate::diffcore::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// f(w) = w^2 realized as the squared output of a bias-free 1x1 net fed 1.
    fn quadratic(params: &MlpParams) -> Result<f64> {
        let out = params.forward(&Tensor::row(&[1.0]))?;
        let w_plus_b = out.data()[0];
        Ok(w_plus_b * w_plus_b)
    }

    #[test]
    fn quadratic_gradient_checks_out() {
        let net = MlpParams::from_layers(vec![LayerParams {
            w: Tensor::new(vec![1, 1], vec![3.0]).unwrap(),
            b: Tensor::row(&[0.0]),
        }])
        .unwrap();
        // d/dw (w + b)^2 = 2(w + b) = 6; d/db likewise.
        let mut analytic = MlpGrads::zeros_like(&net);
        analytic.layers[0].0.data_mut()[0] = 6.0;
        analytic.layers[0].1.data_mut()[0] = 6.0;
        let err = grad_check(&net, &analytic, quadratic, 1e-5).unwrap();
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        let net = MlpParams::from_layers(vec![LayerParams {
            w: Tensor::new(vec![1, 1], vec![3.0]).unwrap(),
            b: Tensor::row(&[0.0]),
        }])
        .unwrap();
        let mut analytic = MlpGrads::zeros_like(&net);
        analytic.layers[0].0.data_mut()[0] = 12.0; // one component doubled
        analytic.layers[0].1.data_mut()[0] = 6.0;
        let err = grad_check(&net, &analytic, quadratic, 1e-5).unwrap();
        assert!(err > 0.3, "relative error {err}");
    }

    #[test]
    fn relu_net_squared_error_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = MlpParams::new(&[2, 8, 8, 1], &mut rng).unwrap();
        let x = Tensor::from_rows(&[
            vec![0.3, -1.2],
            vec![1.0, 0.4],
            vec![-0.7, 0.9],
            vec![0.05, 0.0],
        ])
        .unwrap();
        let target = Tensor::column(&[0.5, -0.25, 1.5, 0.0]);

        let loss_of = |p: &MlpParams| -> Result<f64> {
            let out = p.forward(&x)?;
            let mut acc = 0.0;
            for i in 0..out.numel() {
                let d = out.data()[i] - target.data()[i];
                acc += d * d;
            }
            Ok(acc / out.numel() as f64)
        };

        let mut tape = GradTape::new();
        let binding = net.register(&mut tape);
        let xin = tape.leaf(x.clone());
        let out = binding.forward(&mut tape, xin).unwrap();
        let tgt = tape.leaf(target.clone());
        let diff = tape.sub(out, tgt).unwrap();
        let sq = tape.square(diff);
        let loss = tape.mean(sq);
        let grads = tape.backward(loss).unwrap();
        let analytic = binding.extract(&grads, &net);

        let err = grad_check(&net, &analytic, loss_of, 1e-5).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }
}
