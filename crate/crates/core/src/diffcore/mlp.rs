//! Multilayer perceptron parameters with embedded Adam state.
//!
//! Hidden layers use ReLU, the output layer is linear. Weights are stored
//! row-major as `(out_dim, in_dim)`, biases as `(1, out_dim)`. Each parameter
//! tensor carries its own Adam moment buffers so distinct networks can be
//! stepped independently.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::tape::{GradTape, GradientSet, NodeId};
use crate::diffcore::tensor::Tensor;
use crate::error::{CoreError, Result};

/// Adam hyperparameters. Defaults follow the usual lr 3e-4, betas (0.9, 0.999), eps 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr: 3e-4,
            betas: (0.9, 0.999),
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AdamBuf {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamBuf {
    fn zeros(n: usize) -> Self {
        AdamBuf {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `(out_dim, in_dim)` weight matrix.
    pub w: Tensor,
    /// `(1, out_dim)` bias.
    pub b: Tensor,
}

impl LayerParams {
    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }
}

/// MLP weights plus Adam optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<LayerParams>,
    adam: Vec<(AdamBuf, AdamBuf)>,
    adam_step: u64,
}

/// Per-layer gradients with the same shapes as `MlpParams`.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<(Tensor, Tensor)>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        MlpGrads {
            layers: params
                .layers
                .iter()
                .map(|l| {
                    (
                        Tensor::zeros(l.w.shape().to_vec()),
                        Tensor::zeros(l.b.shape().to_vec()),
                    )
                })
                .collect(),
        }
    }
}

/// Tape handles for one registered MLP: `(weight, bias)` node per layer.
pub struct MlpBinding {
    nodes: Vec<(NodeId, NodeId)>,
}

impl MlpParams {
    /// Random network with the given layer sizes `[in, h1, ..., out]`.
    ///
    /// Weights and biases draw uniformly from `±1/sqrt(fan_in)`; random
    /// initialization is what seeds diversity across ensemble members, so
    /// nothing is initialized to a shared constant.
    pub fn new(sizes: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(CoreError::Invalid(
                "MlpParams::new needs at least [in, out] sizes".into(),
            ));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(CoreError::Invalid("layer sizes must be positive".into()));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut adam = Vec::with_capacity(sizes.len() - 1);
        for k in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut w = vec![0.0; fan_out * fan_in];
            for v in w.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            let mut b = vec![0.0; fan_out];
            for v in b.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            layers.push(LayerParams {
                w: Tensor::new(vec![fan_out, fan_in], w)?,
                b: Tensor::new(vec![1, fan_out], b)?,
            });
            adam.push((
                AdamBuf::zeros(fan_out * fan_in),
                AdamBuf::zeros(fan_out),
            ));
        }
        Ok(MlpParams {
            layers,
            adam,
            adam_step: 0,
        })
    }

    /// Deterministic network from explicit layer tensors (tests, tabular nets).
    pub fn from_layers(layers: Vec<LayerParams>) -> Result<Self> {
        for k in 1..layers.len() {
            if layers[k].in_dim() != layers[k - 1].out_dim() {
                return Err(CoreError::LayerDimension {
                    layer: k,
                    expected: layers[k - 1].out_dim(),
                    got: layers[k].in_dim(),
                });
            }
        }
        let adam = layers
            .iter()
            .map(|l| {
                (
                    AdamBuf::zeros(l.w.numel()),
                    AdamBuf::zeros(l.b.numel()),
                )
            })
            .collect();
        Ok(MlpParams {
            layers,
            adam,
            adam_step: 0,
        })
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Mutable access for perturbation-style tooling (finite differences,
    /// fault injection in tests). Adam state is left untouched.
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn adam_step_count(&self) -> u64 {
        self.adam_step
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.numel() + l.b.numel()).sum()
    }

    pub fn same_architecture(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.w.shape() == b.w.shape())
    }

    /// Plain forward pass: ReLU on hidden layers, identity on the output layer.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let last = self.layers.len() - 1;
        let mut h = input.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            h = affine_value(&h, &layer.w, &layer.b);
            if k < last {
                for v in h.data_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        h.ensure_finite("mlp forward output")?;
        Ok(h)
    }

    /// Registers every parameter tensor as a tape leaf.
    pub fn register(&self, tape: &mut GradTape) -> MlpBinding {
        let nodes = self
            .layers
            .iter()
            .map(|l| (tape.leaf(l.w.clone()), tape.leaf(l.b.clone())))
            .collect();
        MlpBinding { nodes }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape().len() != 2 || input.cols() != self.in_dim() {
            return Err(CoreError::LayerDimension {
                layer: 0,
                expected: self.in_dim(),
                got: if input.shape().len() == 2 {
                    input.cols()
                } else {
                    input.numel()
                },
            });
        }
        Ok(())
    }

    /// Scales every Adam step size by applying one update from `grads`.
    ///
    /// Bias-corrected moments; the shared step counter increments once per
    /// call. Fails without touching anything if a gradient is non-finite or
    /// shaped wrong, naming the offending layer.
    pub fn adam_step(&mut self, grads: &MlpGrads, opt: &OptimConfig) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(CoreError::ShapeMismatch {
                context: "adam_step grads".into(),
                expected: format!("{} layers", self.layers.len()),
                got: format!("{}", grads.layers.len()),
            });
        }
        for (k, (layer, (gw, gb))) in self.layers.iter().zip(&grads.layers).enumerate() {
            if gw.shape() != layer.w.shape() || gb.numel() != layer.b.numel() {
                return Err(CoreError::ShapeMismatch {
                    context: format!("adam_step layer {k}"),
                    expected: format!("{:?}/{:?}", layer.w.shape(), layer.b.shape()),
                    got: format!("{:?}/{:?}", gw.shape(), gb.shape()),
                });
            }
            if !gw.is_finite() {
                return Err(CoreError::NonFinite {
                    context: format!("gradient of layer {k} weights"),
                });
            }
            if !gb.is_finite() {
                return Err(CoreError::NonFinite {
                    context: format!("gradient of layer {k} bias"),
                });
            }
        }

        self.adam_step += 1;
        let t = self.adam_step;
        let (b1, b2) = opt.betas;
        let bc1 = 1.0 - b1.powi(t as i32);
        let bc2 = 1.0 - b2.powi(t as i32);
        for (k, (gw, gb)) in grads.layers.iter().enumerate() {
            let layer = &mut self.layers[k];
            let (wbuf, bbuf) = &mut self.adam[k];
            adam_update(layer.w.data_mut(), gw.data(), wbuf, opt, bc1, bc2);
            adam_update(layer.b.data_mut(), gb.data(), bbuf, opt, bc1, bc2);
        }
        Ok(())
    }
}

fn adam_update(
    param: &mut [f64],
    grad: &[f64],
    buf: &mut AdamBuf,
    opt: &OptimConfig,
    bc1: f64,
    bc2: f64,
) {
    let (b1, b2) = opt.betas;
    for i in 0..param.len() {
        let g = grad[i];
        buf.m[i] = b1 * buf.m[i] + (1.0 - b1) * g;
        buf.v[i] = b2 * buf.v[i] + (1.0 - b2) * g * g;
        let m_hat = buf.m[i] / bc1;
        let v_hat = buf.v[i] / bc2;
        param[i] -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
    }
}

impl MlpBinding {
    /// Records the forward chain on the tape and returns the output node.
    pub fn forward(&self, tape: &mut GradTape, input: NodeId) -> Result<NodeId> {
        let last = self.nodes.len() - 1;
        let mut h = input;
        for (k, &(w, b)) in self.nodes.iter().enumerate() {
            h = tape.affine(h, w, b).map_err(|e| match e {
                CoreError::ShapeMismatch { .. } => CoreError::LayerDimension {
                    layer: k,
                    expected: tape.value(w).cols(),
                    got: tape.value(h).cols(),
                },
                other => other,
            })?;
            if k < last {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    /// Node ids of layer `k` as `(weights, bias)`.
    pub fn layer(&self, k: usize) -> (NodeId, NodeId) {
        self.nodes[k]
    }

    /// Pulls this network's gradients out of a backward result. Parameters
    /// off the loss path come back as zeros.
    pub fn extract(&self, grads: &GradientSet, params: &MlpParams) -> MlpGrads {
        MlpGrads {
            layers: self
                .nodes
                .iter()
                .zip(params.layers())
                .map(|(&(wn, bn), layer)| {
                    (
                        grads.tensor(wn, layer.w.shape()),
                        grads.tensor(bn, layer.b.shape()),
                    )
                })
                .collect(),
        }
    }
}

fn affine_value(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (n, in_dim) = (x.rows(), x.cols());
    let out_dim = w.rows();
    debug_assert_eq!(w.cols(), in_dim);
    let mut out = vec![0.0; n * out_dim];
    for r in 0..n {
        let xrow = x.row_slice(r);
        let orow = &mut out[r * out_dim..(r + 1) * out_dim];
        for o in 0..out_dim {
            let wrow = w.row_slice(o);
            let mut acc = b.data()[o];
            for i in 0..in_dim {
                acc += xrow[i] * wrow[i];
            }
            orow[o] = acc;
        }
    }
    Tensor::new(vec![n, out_dim], out).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = LayerParams {
            w: Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            b: Tensor::row(&[0.0, 0.0]),
        };
        let net = MlpParams::from_layers(vec![layer]).unwrap();
        let out = net.forward(&Tensor::row(&[1.0, 2.0])).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_weight_net_maps_everything_to_zero() {
        let layer = LayerParams {
            w: Tensor::zeros(vec![3, 4]),
            b: Tensor::zeros(vec![1, 3]),
        };
        let net = MlpParams::from_layers(vec![layer]).unwrap();
        let out = net
            .forward(&Tensor::row(&[5.0, -1.0, 2.5, 100.0]))
            .unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn forward_matches_hand_rolled_arithmetic() {
        // Independent straight-line implementation of the same 2-16-1 pass.
        let mut r = rng(7);
        let net = MlpParams::new(&[2, 16, 1], &mut r).unwrap();
        let input = [0.5, -0.25];
        let out = net.forward(&Tensor::row(&input)).unwrap();

        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let mut hidden = [0.0f64; 16];
        for o in 0..16 {
            let mut acc = l0.b.data()[o];
            for i in 0..2 {
                acc += input[i] * l0.w.data()[o * 2 + i];
            }
            hidden[o] = if acc > 0.0 { acc } else { 0.0 };
        }
        let mut expect = l1.b.data()[0];
        for i in 0..16 {
            expect += hidden[i] * l1.w.data()[i];
        }
        assert!((out.data()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_wrong_input_width() {
        let mut r = rng(0);
        let net = MlpParams::new(&[3, 4, 2], &mut r).unwrap();
        match net.forward(&Tensor::row(&[1.0, 2.0])) {
            Err(CoreError::LayerDimension {
                layer, expected, got,
            }) => {
                assert_eq!((layer, expected, got), (0, 3, 2));
            }
            other => panic!("expected LayerDimension, got {other:?}"),
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_fresh_params_unchanged() {
        let mut r = rng(1);
        let mut net = MlpParams::new(&[2, 4, 1], &mut r).unwrap();
        let before = net.clone();
        let grads = MlpGrads::zeros_like(&net);
        net.adam_step(&grads, &OptimConfig::default()).unwrap();
        assert_eq!(net.adam_step_count(), 1);
        for (a, b) in net.layers().iter().zip(before.layers()) {
            assert_eq!(a.w.data(), b.w.data());
            assert_eq!(a.b.data(), b.b.data());
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr_times_sign() {
        let mut r = rng(2);
        let mut net = MlpParams::new(&[1, 1], &mut r).unwrap();
        let before = net.layers()[0].w.data()[0];
        let mut grads = MlpGrads::zeros_like(&net);
        grads.layers[0].0.data_mut()[0] = 0.37;
        let opt = OptimConfig {
            lr: 1e-3,
            ..OptimConfig::default()
        };
        net.adam_step(&grads, &opt).unwrap();
        let delta = net.layers()[0].w.data()[0] - before;
        // First bias-corrected step is -lr * g/(|g| + eps') to within eps.
        assert!((delta + opt.lr).abs() < 1e-6, "delta = {delta}");
    }

    #[test]
    fn adam_is_deterministic_and_counts_steps() {
        let run = || {
            let mut r = rng(3);
            let mut net = MlpParams::new(&[2, 3, 1], &mut r).unwrap();
            let mut grads = MlpGrads::zeros_like(&net);
            for (gw, gb) in grads.layers.iter_mut() {
                for v in gw.data_mut() {
                    *v = 0.1;
                }
                for v in gb.data_mut() {
                    *v = -0.2;
                }
            }
            let opt = OptimConfig::default();
            net.adam_step(&grads, &opt).unwrap();
            net.adam_step(&grads, &opt).unwrap();
            net
        };
        let a = run();
        let b = run();
        assert_eq!(a.adam_step_count(), 2);
        assert_eq!(a, b);
    }

    #[test]
    fn adam_rejects_non_finite_gradients_naming_layer() {
        let mut r = rng(4);
        let mut net = MlpParams::new(&[2, 3, 1], &mut r).unwrap();
        let before = net.clone();
        let mut grads = MlpGrads::zeros_like(&net);
        grads.layers[1].0.data_mut()[0] = f64::NAN;
        let err = net.adam_step(&grads, &OptimConfig::default()).unwrap_err();
        assert!(err.to_string().contains("layer 1"));
        assert_eq!(net, before);
    }
}
