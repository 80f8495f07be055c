//! Reverse-mode differentiation over a recorded operation tape.
//!
//! Forward passes record primitive operations into a `GradTape`; `backward`
//! replays the tape in reverse creation order (which is reverse topological
//! order, since every input must be recorded before its consumers) and
//! accumulates gradients into every node it reaches. Leaves that do not lie
//! on a path to the loss simply receive no gradient and read back as zeros.

use crate::diffcore::math::{sigmoid, softplus};
use crate::diffcore::tensor::Tensor;
use crate::error::{CoreError, Result};

/// Handle to a node on a `GradTape`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `out = x · Wᵀ + b`, with `x: (n, in)`, `w: (out, in)`, `b: (1, out)`.
    Affine { x: NodeId, w: NodeId, b: NodeId },
    Relu { x: NodeId },
    Tanh { x: NodeId },
    Exp { x: NodeId },
    Softplus { x: NodeId },
    /// Pass-through gradient strictly inside `(lo, hi)`, zero outside.
    Clamp { x: NodeId, lo: f64, hi: f64 },
    Scale { x: NodeId, c: f64 },
    AddScalar { x: NodeId, c: f64 },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Square { x: NodeId },
    /// `(n, d) -> (n, 1)`, summing along the last axis.
    RowSum { x: NodeId },
    /// Any shape -> scalar mean over all elements.
    Mean { x: NodeId },
    /// Select one column per row of a `(n, d)` tensor: `out[r, 0] = x[r, idx[r]]`.
    Gather { x: NodeId, indices: Vec<usize> },
    /// Concatenate two 2-D tensors along the column axis.
    Concat { a: NodeId, b: NodeId },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded forward computation. Create one per loss evaluation.
#[derive(Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by `GradTape::backward`.
pub struct GradientSet {
    grads: Vec<Option<Vec<f64>>>,
}

impl GradientSet {
    /// Gradient of the loss w.r.t. node `id`; `None` when the node is off
    /// every path to the loss.
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }

    /// Gradient as a tensor of the given shape, zeros when unreached.
    pub fn tensor(&self, id: NodeId, shape: &[usize]) -> Tensor {
        match &self.grads[id.0] {
            Some(g) => Tensor::new(shape.to_vec(), g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape.to_vec()),
        }
    }
}

impl GradTape {
    pub fn new() -> Self {
        GradTape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value held at a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Records a leaf (parameter or constant input).
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    fn check_same_shape(&self, ctx: &str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(CoreError::ShapeMismatch {
                context: ctx.into(),
                expected: format!("{:?}", self.shape(a)),
                got: format!("{:?}", self.shape(b)),
            });
        }
        Ok(())
    }

    /// `x · Wᵀ + b`. `w` is `(out_dim, in_dim)` row-major, `b` is `(1, out_dim)`.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (n, in_dim) = (xv.rows(), xv.cols());
        let (out_dim, w_in) = (wv.rows(), wv.cols());
        if in_dim != w_in {
            return Err(CoreError::ShapeMismatch {
                context: "affine".into(),
                expected: format!("input cols {w_in}"),
                got: format!("{in_dim}"),
            });
        }
        if bv.numel() != out_dim {
            return Err(CoreError::ShapeMismatch {
                context: "affine bias".into(),
                expected: format!("{out_dim}"),
                got: format!("{}", bv.numel()),
            });
        }
        let mut out = vec![0.0; n * out_dim];
        for r in 0..n {
            let xrow = xv.row_slice(r);
            let orow = &mut out[r * out_dim..(r + 1) * out_dim];
            for o in 0..out_dim {
                let wrow = wv.row_slice(o);
                let mut acc = bv.data()[o];
                for i in 0..in_dim {
                    acc += xrow[i] * wrow[i];
                }
                orow[o] = acc;
            }
        }
        Ok(self.push(Tensor::new(vec![n, out_dim], out)?, Op::Affine { x, w, b }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v.max(0.0)).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor::new(shape, out).unwrap(), Op::Relu { x })
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v.tanh()).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor::new(shape, out).unwrap(), Op::Tanh { x })
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v.exp()).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor::new(shape, out).unwrap(), Op::Exp { x })
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| softplus(*v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor::new(shape, out).unwrap(), Op::Softplus { x })
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let out: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .map(|v| v.clamp(lo, hi))
            .collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor::new(shape, out).unwrap(), Op::Clamp { x, lo, hi })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v * c).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor::new(shape, out).unwrap(), Op::Scale { x, c })
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v + c).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor::new(shape, out).unwrap(), Op::AddScalar { x, c })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape("add", a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, out)?, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape("sub", a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, out)?, Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape("mul", a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, out)?, Op::Mul { a, b }))
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v * v).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor::new(shape, out).unwrap(), Op::Square { x })
    }

    pub fn row_sum(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let (n, d) = (xv.rows(), xv.cols());
        let mut out = vec![0.0; n];
        for r in 0..n {
            out[r] = xv.row_slice(r).iter().sum();
        }
        let _ = d;
        self.push(Tensor::new(vec![n, 1], out).unwrap(), Op::RowSum { x })
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let m = xv.data().iter().sum::<f64>() / xv.numel() as f64;
        self.push(Tensor::scalar(m), Op::Mean { x })
    }

    pub fn gather(&mut self, x: NodeId, indices: Vec<usize>) -> Result<NodeId> {
        let xv = self.value(x);
        let (n, d) = (xv.rows(), xv.cols());
        if indices.len() != n {
            return Err(CoreError::ShapeMismatch {
                context: "gather".into(),
                expected: format!("{n} indices"),
                got: format!("{}", indices.len()),
            });
        }
        let mut out = vec![0.0; n];
        for (r, &i) in indices.iter().enumerate() {
            if i >= d {
                return Err(CoreError::IndexOutOfRange {
                    what: "gather column",
                    index: i,
                    size: d,
                });
            }
            out[r] = xv.get2(r, i);
        }
        Ok(self.push(Tensor::new(vec![n, 1], out)?, Op::Gather { x, indices }))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(CoreError::ShapeMismatch {
                context: "concat".into(),
                expected: format!("{} rows", av.rows()),
                got: format!("{}", bv.rows()),
            });
        }
        let (n, da, db) = (av.rows(), av.cols(), bv.cols());
        let mut out = Vec::with_capacity(n * (da + db));
        for r in 0..n {
            out.extend_from_slice(av.row_slice(r));
            out.extend_from_slice(bv.row_slice(r));
        }
        Ok(self.push(Tensor::new(vec![n, da + db], out)?, Op::Concat { a, b }))
    }

    /// Accumulates `d(loss)/d(node)` for every node that can reach `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<GradientSet> {
        let loss_val = self.value(loss);
        if loss_val.numel() != 1 {
            return Err(CoreError::NonScalarLoss {
                numel: loss_val.numel(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        // Reverse creation order: every node is visited at most once, after
        // all of its consumers.
        for idx in (0..=loss.0).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.apply_backward(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(GradientSet { grads })
    }

    fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
        grads[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    fn apply_backward(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let xv = self.value(*x);
                let wv = self.value(*w);
                let (n, in_dim) = (xv.rows(), xv.cols());
                let out_dim = wv.rows();
                {
                    let gx = Self::accumulate(grads, *x, n * in_dim);
                    for r in 0..n {
                        for o in 0..out_dim {
                            let go = g[r * out_dim + o];
                            if go == 0.0 {
                                continue;
                            }
                            let wrow = wv.row_slice(o);
                            let gxrow = &mut gx[r * in_dim..(r + 1) * in_dim];
                            for i in 0..in_dim {
                                gxrow[i] += go * wrow[i];
                            }
                        }
                    }
                }
                {
                    let gw = Self::accumulate(grads, *w, out_dim * in_dim);
                    for r in 0..n {
                        let xrow = xv.row_slice(r);
                        for o in 0..out_dim {
                            let go = g[r * out_dim + o];
                            if go == 0.0 {
                                continue;
                            }
                            let gwrow = &mut gw[o * in_dim..(o + 1) * in_dim];
                            for i in 0..in_dim {
                                gwrow[i] += go * xrow[i];
                            }
                        }
                    }
                }
                {
                    let gb = Self::accumulate(grads, *b, out_dim);
                    for r in 0..n {
                        for o in 0..out_dim {
                            gb[o] += g[r * out_dim + o];
                        }
                    }
                }
            }
            Op::Relu { x } => {
                let xv = self.value(*x);
                let gx = Self::accumulate(grads, *x, xv.numel());
                for (i, &v) in xv.data().iter().enumerate() {
                    if v > 0.0 {
                        gx[i] += g[i];
                    }
                }
            }
            Op::Tanh { x } => {
                let out = &self.nodes[idx].value;
                let gx = Self::accumulate(grads, *x, out.numel());
                for (i, &y) in out.data().iter().enumerate() {
                    gx[i] += g[i] * (1.0 - y * y);
                }
            }
            Op::Exp { x } => {
                let out = &self.nodes[idx].value;
                let gx = Self::accumulate(grads, *x, out.numel());
                for (i, &y) in out.data().iter().enumerate() {
                    gx[i] += g[i] * y;
                }
            }
            Op::Softplus { x } => {
                let xv = self.value(*x);
                let gx = Self::accumulate(grads, *x, xv.numel());
                for (i, &v) in xv.data().iter().enumerate() {
                    gx[i] += g[i] * sigmoid(v);
                }
            }
            Op::Clamp { x, lo, hi } => {
                let xv = self.value(*x);
                let gx = Self::accumulate(grads, *x, xv.numel());
                for (i, &v) in xv.data().iter().enumerate() {
                    if v > *lo && v < *hi {
                        gx[i] += g[i];
                    }
                }
            }
            Op::Scale { x, c } => {
                let gx = Self::accumulate(grads, *x, g.len());
                for i in 0..g.len() {
                    gx[i] += g[i] * c;
                }
            }
            Op::AddScalar { x, .. } => {
                let gx = Self::accumulate(grads, *x, g.len());
                for i in 0..g.len() {
                    gx[i] += g[i];
                }
            }
            Op::Add { a, b } => {
                {
                    let ga = Self::accumulate(grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i];
                    }
                }
                let gb = Self::accumulate(grads, *b, g.len());
                for i in 0..g.len() {
                    gb[i] += g[i];
                }
            }
            Op::Sub { a, b } => {
                {
                    let ga = Self::accumulate(grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i];
                    }
                }
                let gb = Self::accumulate(grads, *b, g.len());
                for i in 0..g.len() {
                    gb[i] -= g[i];
                }
            }
            Op::Mul { a, b } => {
                let av = self.value(*a).data().to_vec();
                let bv = self.value(*b).data().to_vec();
                {
                    let ga = Self::accumulate(grads, *a, g.len());
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                }
                let gb = Self::accumulate(grads, *b, g.len());
                for i in 0..g.len() {
                    gb[i] += g[i] * av[i];
                }
            }
            Op::Square { x } => {
                let xv = self.value(*x);
                let gx = Self::accumulate(grads, *x, xv.numel());
                for (i, &v) in xv.data().iter().enumerate() {
                    gx[i] += 2.0 * g[i] * v;
                }
            }
            Op::RowSum { x } => {
                let xv = self.value(*x);
                let (n, d) = (xv.rows(), xv.cols());
                let gx = Self::accumulate(grads, *x, n * d);
                for r in 0..n {
                    let gr = g[r];
                    for i in 0..d {
                        gx[r * d + i] += gr;
                    }
                }
            }
            Op::Mean { x } => {
                let xv = self.value(*x);
                let scale = g[0] / xv.numel() as f64;
                let gx = Self::accumulate(grads, *x, xv.numel());
                for gi in gx.iter_mut() {
                    *gi += scale;
                }
            }
            Op::Gather { x, indices } => {
                let xv = self.value(*x);
                let d = xv.cols();
                let gx = Self::accumulate(grads, *x, xv.numel());
                for (r, &i) in indices.iter().enumerate() {
                    gx[r * d + i] += g[r];
                }
            }
            Op::Concat { a, b } => {
                let (da, db) = (self.value(*a).cols(), self.value(*b).cols());
                let n = self.value(*a).rows();
                {
                    let ga = Self::accumulate(grads, *a, n * da);
                    for r in 0..n {
                        for i in 0..da {
                            ga[r * da + i] += g[r * (da + db) + i];
                        }
                    }
                }
                let gb = Self::accumulate(grads, *b, n * db);
                for r in 0..n {
                    for i in 0..db {
                        gb[r * db + i] += g[r * (da + db) + da + i];
                    }
                }
            }
        }
    }
}
