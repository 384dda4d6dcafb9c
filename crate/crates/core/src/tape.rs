//! Reverse-mode automatic differentiation on a Wengert tape.
//!
//! One tape records one forward pass; `backward` replays it in reverse and
//! returns gradients for trainable leaves. `detach` re-enters a value as a
//! constant so nothing behind it receives gradient - that single primitive
//! is what makes stop-gradient losses expressible.
//!
//! A tape is single-threaded and lives for one training iteration.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fft;
use crate::tensor::{self, Tensor};

/// Index of a recorded node. Only meaningful for the tape that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { trainable: bool },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    Recip(NodeId),
    Exp(NodeId),
    Cos(NodeId),
    Sin(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Sum(NodeId),
    SumSquares(NodeId),
    MatVec { mat: NodeId, vec: NodeId },
    Conv2d { input: NodeId, kernel: NodeId },
    Upsample2x(NodeId),
    ChannelAffine { input: NodeId, gamma: NodeId, beta: NodeId },
    SliceChannel { input: NodeId, channel: usize },
    Stack2(NodeId, NodeId),
    ComplexMul(NodeId, NodeId),
    SquaredMagnitude(NodeId),
    Fft2(NodeId),
    Ifft2(NodeId),
    // source id kept so the recorded graph stays complete
    Detach(#[allow(dead_code)] NodeId),
}

struct Node {
    op: Op,
    value: Arc<Tensor>,
    needs_grad: bool,
}

/// Gradients of a scalar loss with respect to the tape's trainable leaves.
pub struct GradientMap {
    grads: HashMap<NodeId, Tensor>,
}

impl GradientMap {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    /// Removes and returns the gradient for a leaf; panics if `id` was not a
    /// trainable leaf of the tape that produced this map.
    pub fn take(&mut self, id: NodeId) -> Tensor {
        self.grads.remove(&id).expect("gradient queried for a non-leaf node")
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn value_arc(&self, id: NodeId) -> Arc<Tensor> {
        Arc::clone(&self.nodes[id.0].value)
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        self.push_arc(op, Arc::new(value), needs_grad)
    }

    fn push_arc(&mut self, op: Op, value: Arc<Tensor>, needs_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value, needs_grad });
        id
    }

    fn ng(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// A trainable leaf: `backward` reports a gradient for it.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf { trainable: true }, value, true)
    }

    /// A constant input: never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf { trainable: false }, value, false)
    }

    /// Constant sharing the caller's buffer; used for measurement vectors and
    /// forward-model operators that persist across iterations.
    pub fn constant_shared(&mut self, value: &Arc<Tensor>) -> NodeId {
        self.push_arc(Op::Leaf { trainable: false }, Arc::clone(value), false)
    }

    /// Same forward value, but backward treats it as a constant.
    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let value = self.value_arc(x);
        self.push_arc(Op::Detach(x), value, false)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = tensor::add(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Add(a, b), value, ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = tensor::sub(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Sub(a, b), value, ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = tensor::mul(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Mul(a, b), value, ng))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = tensor::div(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::Div(a, b), value, ng))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = tensor::scale(self.value(x), c);
        let ng = self.ng(x);
        self.push(Op::Scale(x, c), value, ng)
    }

    pub fn recip(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| 1.0 / v);
        let ng = self.ng(x);
        self.push(Op::Recip(x), value, ng)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::exp);
        let ng = self.ng(x);
        self.push(Op::Exp(x), value, ng)
    }

    pub fn cos(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::cos);
        let ng = self.ng(x);
        self.push(Op::Cos(x), value, ng)
    }

    pub fn sin(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::sin);
        let ng = self.ng(x);
        self.push(Op::Sin(x), value, ng)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        let ng = self.ng(x);
        self.push(Op::Relu(x), value, ng)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| 1.0 / (1.0 + (-v).exp()));
        let ng = self.ng(x);
        self.push(Op::Sigmoid(x), value, ng)
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        let ng = self.ng(x);
        self.push(Op::Sum(x), value, ng)
    }

    /// Half the squared l2 norm, as a scalar node: (1/2)*sum(v^2).
    pub fn sum_squares(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::scalar(0.5 * self.value(x).squared_norm());
        let ng = self.ng(x);
        self.push(Op::SumSquares(x), value, ng)
    }

    pub fn matvec(&mut self, mat: NodeId, vec: NodeId) -> Result<NodeId> {
        let value = tensor::matvec(self.value(mat), self.value(vec))?;
        let ng = self.ng(mat) || self.ng(vec);
        Ok(self.push(Op::MatVec { mat, vec }, value, ng))
    }

    pub fn conv2d(&mut self, input: NodeId, kernel: NodeId) -> Result<NodeId> {
        let value = tensor::conv2d(self.value(input), self.value(kernel))?;
        let ng = self.ng(input) || self.ng(kernel);
        Ok(self.push(Op::Conv2d { input, kernel }, value, ng))
    }

    pub fn upsample2x(&mut self, x: NodeId) -> Result<NodeId> {
        let value = tensor::upsample2x(self.value(x))?;
        let ng = self.ng(x);
        Ok(self.push(Op::Upsample2x(x), value, ng))
    }

    pub fn channel_affine(&mut self, input: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let value = tensor::channel_affine(self.value(input), self.value(gamma), self.value(beta))?;
        let ng = self.ng(input) || self.ng(gamma) || self.ng(beta);
        Ok(self.push(Op::ChannelAffine { input, gamma, beta }, value, ng))
    }

    pub fn slice_channel(&mut self, input: NodeId, channel: usize) -> Result<NodeId> {
        let value = tensor::slice_channel(self.value(input), channel)?;
        let ng = self.ng(input);
        Ok(self.push(Op::SliceChannel { input, channel }, value, ng))
    }

    /// Packs two [H, W] planes into a [2, H, W] complex node.
    pub fn stack2(&mut self, re: NodeId, im: NodeId) -> Result<NodeId> {
        let value = tensor::stack2(self.value(re), self.value(im))?;
        let ng = self.ng(re) || self.ng(im);
        Ok(self.push(Op::Stack2(re, im), value, ng))
    }

    pub fn complex_mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = tensor::complex_mul(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Op::ComplexMul(a, b), value, ng))
    }

    pub fn squared_magnitude(&mut self, x: NodeId) -> Result<NodeId> {
        let value = tensor::squared_magnitude(self.value(x))?;
        let ng = self.ng(x);
        Ok(self.push(Op::SquaredMagnitude(x), value, ng))
    }

    pub fn fft2(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.transform(x, false)?;
        let ng = self.ng(x);
        Ok(self.push(Op::Fft2(x), value, ng))
    }

    pub fn ifft2(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.transform(x, true)?;
        let ng = self.ng(x);
        Ok(self.push(Op::Ifft2(x), value, ng))
    }

    fn transform(&self, x: NodeId, inverse: bool) -> Result<Tensor> {
        let v = self.value(x);
        let shape = v.shape();
        if shape.len() != 3 || shape[0] != 2 {
            return Err(Error::shape("fft2", format!("expected [2,H,W], got {:?}", shape)));
        }
        let (h, w) = (shape[1], shape[2]);
        let mut data = v.data().to_vec();
        let (re, im) = data.split_at_mut(h * w);
        fft::fft2_planes(re, im, h, w, inverse)?;
        Tensor::new(shape.to_vec(), data)
    }

    /// Reverse sweep from a scalar `loss`. Returns the gradient for every
    /// trainable leaf; leaves the loss does not reach get zeros.
    pub fn backward(&self, loss: NodeId) -> Result<GradientMap> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(Error::NotScalar(loss_value.shape().to_vec()));
        }

        let mut adjoints: Vec<Option<Tensor>> = Vec::new();
        adjoints.resize_with(self.nodes.len(), || None);
        adjoints[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad && !matches!(self.nodes[idx].op, Op::Leaf { .. }) {
                continue;
            }
            let g = match adjoints[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(idx, &g, &mut adjoints);
            if matches!(self.nodes[idx].op, Op::Leaf { trainable: true }) {
                adjoints[idx] = Some(g);
            }
        }

        let mut grads = HashMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { trainable: true } = node.op {
                let g = adjoints[idx]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(node.value.shape().to_vec()));
                grads.insert(NodeId(idx), g);
            }
        }
        Ok(GradientMap { grads })
    }

    fn accumulate(&self, adjoints: &mut [Option<Tensor>], target: NodeId, contribution: Tensor) {
        if !self.ng(target) {
            return;
        }
        match &mut adjoints[target.0] {
            Some(existing) => tensor::add_assign(existing, &contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor, adjoints: &mut [Option<Tensor>]) {
        match &self.nodes[idx].op {
            Op::Leaf { .. } | Op::Detach(_) => {}
            Op::Add(a, b) => {
                self.accumulate(adjoints, *a, g.clone());
                self.accumulate(adjoints, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(adjoints, *a, g.clone());
                self.accumulate(adjoints, *b, tensor::scale(g, -1.0));
            }
            Op::Mul(a, b) => {
                let ga = tensor::mul(g, self.value(*b)).expect("recorded shapes agree");
                let gb = tensor::mul(g, self.value(*a)).expect("recorded shapes agree");
                self.accumulate(adjoints, *a, ga);
                self.accumulate(adjoints, *b, gb);
            }
            Op::Div(a, b) => {
                let bv = self.value(*b);
                let ga = tensor::div(g, bv).expect("recorded shapes agree");
                let av = self.value(*a);
                let gb_data: Vec<f64> = g
                    .data()
                    .iter()
                    .zip(av.data().iter().zip(bv.data()))
                    .map(|(&gi, (&a_, &b_))| -gi * a_ / (b_ * b_))
                    .collect();
                let gb = Tensor::new(bv.shape().to_vec(), gb_data).expect("same shape");
                self.accumulate(adjoints, *a, ga);
                self.accumulate(adjoints, *b, gb);
            }
            Op::Scale(x, c) => {
                self.accumulate(adjoints, *x, tensor::scale(g, *c));
            }
            Op::Recip(x) => {
                let xv = self.value(*x);
                let data = g
                    .data()
                    .iter()
                    .zip(xv.data())
                    .map(|(&gi, &v)| -gi / (v * v))
                    .collect();
                self.accumulate(adjoints, *x, Tensor::new(xv.shape().to_vec(), data).unwrap());
            }
            Op::Exp(x) => {
                let out = &self.nodes[idx].value;
                let gx = tensor::mul(g, out).expect("same shape");
                self.accumulate(adjoints, *x, gx);
            }
            Op::Cos(x) => {
                let xv = self.value(*x);
                let data = g.data().iter().zip(xv.data()).map(|(&gi, &v)| -gi * v.sin()).collect();
                self.accumulate(adjoints, *x, Tensor::new(xv.shape().to_vec(), data).unwrap());
            }
            Op::Sin(x) => {
                let xv = self.value(*x);
                let data = g.data().iter().zip(xv.data()).map(|(&gi, &v)| gi * v.cos()).collect();
                self.accumulate(adjoints, *x, Tensor::new(xv.shape().to_vec(), data).unwrap());
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let data = g
                    .data()
                    .iter()
                    .zip(xv.data())
                    .map(|(&gi, &v)| if v > 0.0 { gi } else { 0.0 })
                    .collect();
                self.accumulate(adjoints, *x, Tensor::new(xv.shape().to_vec(), data).unwrap());
            }
            Op::Sigmoid(x) => {
                let out = &self.nodes[idx].value;
                let data = g
                    .data()
                    .iter()
                    .zip(out.data())
                    .map(|(&gi, &s)| gi * s * (1.0 - s))
                    .collect();
                self.accumulate(adjoints, *x, Tensor::new(out.shape().to_vec(), data).unwrap());
            }
            Op::Sum(x) => {
                let xv = self.value(*x);
                self.accumulate(adjoints, *x, Tensor::full(xv.shape().to_vec(), g.item()));
            }
            Op::SumSquares(x) => {
                // d/dv of (1/2)*sum(v^2) is v
                let gx = tensor::scale(self.value(*x), g.item());
                self.accumulate(adjoints, *x, gx);
            }
            Op::MatVec { mat, vec } => {
                if self.ng(*vec) {
                    let gv = tensor::matvec_adjoint_vec(self.value(*mat), g, self.value(*vec).shape());
                    self.accumulate(adjoints, *vec, gv);
                }
                if self.ng(*mat) {
                    let gm = tensor::matvec_adjoint_mat(g, self.value(*vec));
                    self.accumulate(adjoints, *mat, gm);
                }
            }
            Op::Conv2d { input, kernel } => {
                if self.ng(*input) {
                    let gi = tensor::conv2d_adjoint_input(g, self.value(*kernel), self.value(*input).shape());
                    self.accumulate(adjoints, *input, gi);
                }
                if self.ng(*kernel) {
                    let gk = tensor::conv2d_adjoint_kernel(g, self.value(*input), self.value(*kernel).shape());
                    self.accumulate(adjoints, *kernel, gk);
                }
            }
            Op::Upsample2x(x) => {
                let gx = tensor::upsample2x_adjoint(g, self.value(*x).shape());
                self.accumulate(adjoints, *x, gx);
            }
            Op::ChannelAffine { input, gamma, beta } => {
                let inv = self.value(*input);
                let c = inv.shape()[0];
                let plane = inv.shape()[1] * inv.shape()[2];
                if self.ng(*input) {
                    let gm = self.value(*gamma);
                    let mut data = vec![0.0; inv.numel()];
                    for ch in 0..c {
                        let gch = gm.data()[ch];
                        let src = &g.data()[ch * plane..(ch + 1) * plane];
                        let dst = &mut data[ch * plane..(ch + 1) * plane];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d = gch * s;
                        }
                    }
                    self.accumulate(adjoints, *input, Tensor::new(inv.shape().to_vec(), data).unwrap());
                }
                if self.ng(*gamma) {
                    let mut data = vec![0.0; c];
                    for ch in 0..c {
                        let gs = &g.data()[ch * plane..(ch + 1) * plane];
                        let xs = &inv.data()[ch * plane..(ch + 1) * plane];
                        data[ch] = gs.iter().zip(xs).map(|(a, b)| a * b).sum();
                    }
                    self.accumulate(adjoints, *gamma, Tensor::new(vec![c], data).unwrap());
                }
                if self.ng(*beta) {
                    let mut data = vec![0.0; c];
                    for ch in 0..c {
                        data[ch] = g.data()[ch * plane..(ch + 1) * plane].iter().sum();
                    }
                    self.accumulate(adjoints, *beta, Tensor::new(vec![c], data).unwrap());
                }
            }
            Op::SliceChannel { input, channel } => {
                let inv = self.value(*input);
                let plane = inv.shape()[1] * inv.shape()[2];
                let mut data = vec![0.0; inv.numel()];
                data[channel * plane..(channel + 1) * plane].copy_from_slice(g.data());
                self.accumulate(adjoints, *input, Tensor::new(inv.shape().to_vec(), data).unwrap());
            }
            Op::Stack2(a, b) => {
                let plane = self.value(*a).numel();
                let shape = self.value(*a).shape().to_vec();
                let ga = Tensor::new(shape.clone(), g.data()[..plane].to_vec()).unwrap();
                let gb = Tensor::new(shape, g.data()[plane..].to_vec()).unwrap();
                self.accumulate(adjoints, *a, ga);
                self.accumulate(adjoints, *b, gb);
            }
            Op::ComplexMul(a, b) => {
                // out = a*b over C; cotangent pulls back via the conjugate factor
                let plane = self.value(*a).shape()[1] * self.value(*a).shape()[2];
                let (gr, gi) = g.data().split_at(plane);
                let mk = |other: &Tensor| {
                    let (or_, oi) = other.data().split_at(plane);
                    let mut data = vec![0.0; 2 * plane];
                    {
                        let (dr, di) = data.split_at_mut(plane);
                        for j in 0..plane {
                            dr[j] = gr[j] * or_[j] + gi[j] * oi[j];
                            di[j] = -gr[j] * oi[j] + gi[j] * or_[j];
                        }
                    }
                    Tensor::new(g.shape().to_vec(), data).unwrap()
                };
                if self.ng(*a) {
                    let ga = mk(self.value(*b));
                    self.accumulate(adjoints, *a, ga);
                }
                if self.ng(*b) {
                    let gb = mk(self.value(*a));
                    self.accumulate(adjoints, *b, gb);
                }
            }
            Op::SquaredMagnitude(x) => {
                let xv = self.value(*x);
                let plane = xv.shape()[1] * xv.shape()[2];
                let (re, im) = xv.data().split_at(plane);
                let mut data = vec![0.0; 2 * plane];
                {
                    let (dr, di) = data.split_at_mut(plane);
                    for j in 0..plane {
                        dr[j] = 2.0 * g.data()[j] * re[j];
                        di[j] = 2.0 * g.data()[j] * im[j];
                    }
                }
                self.accumulate(adjoints, *x, Tensor::new(xv.shape().to_vec(), data).unwrap());
            }
            Op::Fft2(x) => {
                // adjoint of the unnormalized forward DFT is H*W times the inverse
                let gx = self.transform_grad(g, true, (self.value(*x).numel() / 2) as f64);
                self.accumulate(adjoints, *x, gx);
            }
            Op::Ifft2(x) => {
                // adjoint of the normalized inverse DFT is 1/(H*W) times the forward
                let gx = self.transform_grad(g, false, 1.0 / (self.value(*x).numel() / 2) as f64);
                self.accumulate(adjoints, *x, gx);
            }
        }
    }

    fn transform_grad(&self, g: &Tensor, inverse: bool, scale: f64) -> Tensor {
        let shape = g.shape().to_vec();
        let (h, w) = (shape[1], shape[2]);
        let mut data = g.data().to_vec();
        {
            let (re, im) = data.split_at_mut(h * w);
            fft::fft2_planes(re, im, h, w, inverse).expect("validated at record time");
        }
        for v in data.iter_mut() {
            *v *= scale;
        }
        Tensor::new(shape, data).unwrap()
    }
}
