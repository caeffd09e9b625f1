//! Define-by-run reverse-mode autodiff.
//!
//! Values are computed eagerly as ops are recorded; [`Graph::backward`]
//! walks the tape in reverse and accumulates gradients into every node that
//! (transitively) depends on a parameter. Node indices are only valid for
//! the graph that produced them.

use lltext_core::Scalar;

use crate::kernels;
use crate::tensor::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    AddConst(usize),
    MulConst(usize, f64),
    PowConst(usize, f64),
    MaxConst(usize, f64),
    Abs(usize),
    Huber(usize, f64),
    Ln(usize),
    ClampUnit(usize, f64),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    Sqrt(usize),
    SoftmaxAll(usize),
    BinEntropy(usize),
    Conv2d {
        input: usize,
        weight: usize,
        bias: Option<usize>,
        stride: usize,
        pad: usize,
    },
    AvgPool {
        input: usize,
        k: usize,
    },
    Upsample2x(usize),
    ConcatC(Vec<usize>),
    SliceC {
        input: usize,
        from: usize,
    },
    CropHw {
        input: usize,
        y0: usize,
        h: usize,
        x0: usize,
        w: usize,
    },
    GlobalAvgPool(usize),
    SpatialDot {
        value: usize,
        weights: usize,
    },
    ChannelDot {
        value: usize,
        weights: usize,
    },
    SumAll(usize),
    MeanAll(usize),
}

struct Node<T> {
    value: Tensor<T>,
    grad: Option<Tensor<T>>,
    needs_grad: bool,
    op: Op,
}

/// How the right operand of a binary op broadcasts against the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// Right is a single element.
    Scalar,
    /// Left `[C,H,W]`, right `[C,1,1]`.
    Channel,
    /// Left `[C,H,W]`, right `[1,H,W]`.
    Spatial,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<T>, needs_grad: bool, op: Op) -> NodeRef {
        self.nodes.push(Node {
            value,
            grad: None,
            needs_grad,
            op,
        });
        NodeRef(self.nodes.len() - 1)
    }

    /// Constant input; gradients are not tracked through it.
    pub fn leaf(&mut self, value: Tensor<T>) -> NodeRef {
        self.push(value, false, Op::Leaf)
    }

    /// Trainable input; `backward` will produce its gradient.
    pub fn param(&mut self, value: Tensor<T>) -> NodeRef {
        self.push(value, true, Op::Leaf)
    }

    pub fn value(&self, n: NodeRef) -> &Tensor<T> {
        &self.nodes[n.0].value
    }

    pub fn grad(&self, n: NodeRef) -> Option<&Tensor<T>> {
        self.nodes[n.0].grad.as_ref()
    }

    pub fn scalar_value(&self, n: NodeRef) -> T {
        self.value(n).item()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn needs(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    fn broadcast_kind(a: &[usize], b: &[usize]) -> Broadcast {
        if a == b {
            return Broadcast::Same;
        }
        if b.iter().product::<usize>() == 1 {
            return Broadcast::Scalar;
        }
        if a.len() == 3 && b.len() == 3 {
            if b[0] == a[0] && b[1] == 1 && b[2] == 1 {
                return Broadcast::Channel;
            }
            if b[0] == 1 && b[1] == a[1] && b[2] == a[2] {
                return Broadcast::Spatial;
            }
        }
        panic!("incompatible shapes for binary op: {a:?} vs {b:?}");
    }

    fn binary(&mut self, a: NodeRef, b: NodeRef, op: Op, f: impl Fn(T, T) -> T) -> NodeRef {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let kind = Self::broadcast_kind(va.shape(), vb.shape());
        let value = match kind {
            Broadcast::Same => {
                let data = va
                    .data()
                    .iter()
                    .zip(vb.data())
                    .map(|(x, y)| f(*x, *y))
                    .collect();
                Tensor::new(va.shape().to_vec(), data)
            }
            Broadcast::Scalar => {
                let s = vb.data()[0];
                va.map(|x| f(x, s))
            }
            Broadcast::Channel => {
                let (c, h, w) = va.chw();
                let mut data = Vec::with_capacity(c * h * w);
                for ci in 0..c {
                    let s = vb.data()[ci];
                    for i in 0..h * w {
                        data.push(f(va.data()[ci * h * w + i], s));
                    }
                }
                Tensor::new(vec![c, h, w], data)
            }
            Broadcast::Spatial => {
                let (c, h, w) = va.chw();
                let mut data = Vec::with_capacity(c * h * w);
                for ci in 0..c {
                    for i in 0..h * w {
                        data.push(f(va.data()[ci * h * w + i], vb.data()[i]));
                    }
                }
                Tensor::new(vec![c, h, w], data)
            }
        };
        let needs = self.needs(a.0) || self.needs(b.0);
        self.push(value, needs, op)
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.binary(a, b, Op::Add(a.0, b.0), |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.binary(a, b, Op::Sub(a.0, b.0), |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.binary(a, b, Op::Mul(a.0, b.0), |x, y| x * y)
    }

    pub fn div(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.binary(a, b, Op::Div(a.0, b.0), |x, y| x / y)
    }

    fn unary(&mut self, a: NodeRef, op: Op, f: impl Fn(T) -> T) -> NodeRef {
        let value = self.nodes[a.0].value.map(f);
        let needs = self.needs(a.0);
        self.push(value, needs, op)
    }

    pub fn neg(&mut self, a: NodeRef) -> NodeRef {
        self.unary(a, Op::Neg(a.0), |x| -x)
    }

    pub fn add_const(&mut self, a: NodeRef, c: f64) -> NodeRef {
        self.unary(a, Op::AddConst(a.0), |x| x + T::of(c))
    }

    pub fn mul_const(&mut self, a: NodeRef, c: f64) -> NodeRef {
        self.unary(a, Op::MulConst(a.0, c), |x| x * T::of(c))
    }

    /// Elementwise power with a constant exponent; the base is clamped to a
    /// tiny positive floor so fractional exponents stay real.
    pub fn pow_const(&mut self, a: NodeRef, p: f64) -> NodeRef {
        self.unary(a, Op::PowConst(a.0, p), |x| {
            x.max(T::of(POW_FLOOR)).powf(T::of(p))
        })
    }

    pub fn max_const(&mut self, a: NodeRef, c: f64) -> NodeRef {
        self.unary(a, Op::MaxConst(a.0, c), |x| x.max(T::of(c)))
    }

    pub fn relu(&mut self, a: NodeRef) -> NodeRef {
        self.max_const(a, 0.0)
    }

    pub fn abs(&mut self, a: NodeRef) -> NodeRef {
        self.unary(a, Op::Abs(a.0), |x| x.abs())
    }

    /// Elementwise Huber penalty: `0.5 x^2/delta` for |x| < delta, else
    /// `|x| - 0.5 delta`.
    pub fn huber(&mut self, a: NodeRef, delta: f64) -> NodeRef {
        let d = T::of(delta);
        self.unary(a, Op::Huber(a.0, delta), move |x| {
            if x.abs() < d {
                T::of(0.5) * x * x / d
            } else {
                x.abs() - T::of(0.5) * d
            }
        })
    }

    pub fn ln(&mut self, a: NodeRef) -> NodeRef {
        self.unary(a, Op::Ln(a.0), |x| x.ln())
    }

    /// Clamps probabilities into [eps, 1 - eps] before a logarithm.
    pub fn clamp_unit(&mut self, a: NodeRef, eps: f64) -> NodeRef {
        self.unary(a, Op::ClampUnit(a.0, eps), move |x| {
            x.clamp(T::of(eps), T::of(1.0 - eps))
        })
    }

    pub fn leaky_relu(&mut self, a: NodeRef, slope: f64) -> NodeRef {
        let s = T::of(slope);
        self.unary(a, Op::LeakyRelu(a.0, slope), move |x| {
            if x > T::zero() {
                x
            } else {
                x * s
            }
        })
    }

    pub fn sigmoid(&mut self, a: NodeRef) -> NodeRef {
        self.unary(a, Op::Sigmoid(a.0), |x| T::one() / (T::one() + (-x).exp()))
    }

    pub fn tanh(&mut self, a: NodeRef) -> NodeRef {
        self.unary(a, Op::Tanh(a.0), |x| x.tanh())
    }

    pub fn sqrt(&mut self, a: NodeRef) -> NodeRef {
        self.unary(a, Op::Sqrt(a.0), |x| x.max(T::zero()).sqrt())
    }

    /// Binary entropy of a map in [0, 1], with 0·log 0 := 0.
    pub fn bin_entropy(&mut self, a: NodeRef) -> NodeRef {
        self.unary(a, Op::BinEntropy(a.0), |x| {
            let mut acc = T::zero();
            if x > T::zero() {
                acc = acc - x * x.ln();
            }
            let y = T::one() - x;
            if y > T::zero() {
                acc = acc - y * y.ln();
            }
            acc
        })
    }

    /// Softmax over every element of the tensor (used for attention vectors).
    pub fn softmax_all(&mut self, a: NodeRef) -> NodeRef {
        let v = &self.nodes[a.0].value;
        let max = v.data().iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = v.data().iter().map(|x| (*x - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        let data = exps.iter().map(|e| *e / sum).collect();
        let value = Tensor::new(v.shape().to_vec(), data);
        let needs = self.needs(a.0);
        self.push(value, needs, Op::SoftmaxAll(a.0))
    }

    pub fn conv2d(
        &mut self,
        input: NodeRef,
        weight: NodeRef,
        bias: Option<NodeRef>,
        stride: usize,
        pad: usize,
    ) -> NodeRef {
        let value = kernels::conv2d(
            &self.nodes[input.0].value,
            &self.nodes[weight.0].value,
            bias.map(|b| &self.nodes[b.0].value),
            stride,
            pad,
        );
        let needs = self.needs(input.0)
            || self.needs(weight.0)
            || bias.map_or(false, |b| self.needs(b.0));
        self.push(
            value,
            needs,
            Op::Conv2d {
                input: input.0,
                weight: weight.0,
                bias: bias.map(|b| b.0),
                stride,
                pad,
            },
        )
    }

    pub fn avg_pool(&mut self, input: NodeRef, k: usize) -> NodeRef {
        let value = kernels::avg_pool(&self.nodes[input.0].value, k);
        let needs = self.needs(input.0);
        self.push(value, needs, Op::AvgPool { input: input.0, k })
    }

    pub fn upsample2x(&mut self, input: NodeRef) -> NodeRef {
        let value = kernels::upsample2x(&self.nodes[input.0].value);
        let needs = self.needs(input.0);
        self.push(value, needs, Op::Upsample2x(input.0))
    }

    /// Concatenates CHW tensors along the channel axis.
    pub fn concat_c(&mut self, inputs: &[NodeRef]) -> NodeRef {
        assert!(!inputs.is_empty());
        let (_, h, w) = self.nodes[inputs[0].0].value.chw();
        let mut data = Vec::new();
        let mut c_total = 0;
        for n in inputs {
            let v = &self.nodes[n.0].value;
            let (c, vh, vw) = v.chw();
            assert_eq!((vh, vw), (h, w), "concat spatial mismatch");
            c_total += c;
            data.extend_from_slice(v.data());
        }
        let needs = inputs.iter().any(|n| self.needs(n.0));
        self.push(
            Tensor::new(vec![c_total, h, w], data),
            needs,
            Op::ConcatC(inputs.iter().map(|n| n.0).collect()),
        )
    }

    /// Channel slice `[from, to)`.
    pub fn slice_c(&mut self, input: NodeRef, from: usize, to: usize) -> NodeRef {
        let v = &self.nodes[input.0].value;
        let (c, h, w) = v.chw();
        assert!(from < to && to <= c, "slice {from}..{to} of {c} channels");
        let data = v.data()[from * h * w..to * h * w].to_vec();
        let needs = self.needs(input.0);
        self.push(
            Tensor::new(vec![to - from, h, w], data),
            needs,
            Op::SliceC {
                input: input.0,
                from,
            },
        )
    }

    /// Spatial crop `[y0, y0+h) × [x0, x0+w)`.
    pub fn crop_hw(&mut self, input: NodeRef, y0: usize, h: usize, x0: usize, w: usize) -> NodeRef {
        let v = &self.nodes[input.0].value;
        let (c, vh, vw) = v.chw();
        assert!(y0 + h <= vh && x0 + w <= vw, "crop out of range");
        let mut data = Vec::with_capacity(c * h * w);
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    data.push(v.at3(ci, y0 + y, x0 + x));
                }
            }
        }
        let needs = self.needs(input.0);
        self.push(
            Tensor::new(vec![c, h, w], data),
            needs,
            Op::CropHw {
                input: input.0,
                y0,
                h,
                x0,
                w,
            },
        )
    }

    /// Per-channel spatial mean: `[C,H,W]` to `[C,1,1]`.
    pub fn global_avg_pool(&mut self, input: NodeRef) -> NodeRef {
        let v = &self.nodes[input.0].value;
        let (c, h, w) = v.chw();
        let inv = T::of(1.0 / (h * w) as f64);
        let mut data = Vec::with_capacity(c);
        for ci in 0..c {
            let s: T = v.data()[ci * h * w..(ci + 1) * h * w].iter().copied().sum();
            data.push(s * inv);
        }
        let needs = self.needs(input.0);
        self.push(
            Tensor::new(vec![c, 1, 1], data),
            needs,
            Op::GlobalAvgPool(input.0),
        )
    }

    /// `out[c] = sum_hw value[c,h,w] * weights[0,h,w]`; result `[C,1,1]`.
    pub fn spatial_dot(&mut self, value: NodeRef, weights: NodeRef) -> NodeRef {
        let v = &self.nodes[value.0].value;
        let wts = &self.nodes[weights.0].value;
        let (c, h, w) = v.chw();
        let (wc, wh, ww) = wts.chw();
        assert_eq!((wc, wh, ww), (1, h, w), "spatial_dot weight shape");
        let mut data = Vec::with_capacity(c);
        for ci in 0..c {
            let mut acc = T::zero();
            for i in 0..h * w {
                acc += v.data()[ci * h * w + i] * wts.data()[i];
            }
            data.push(acc);
        }
        let needs = self.needs(value.0) || self.needs(weights.0);
        self.push(
            Tensor::new(vec![c, 1, 1], data),
            needs,
            Op::SpatialDot {
                value: value.0,
                weights: weights.0,
            },
        )
    }

    /// `out[h,w] = sum_c value[c,h,w] * weights[c,0,0]`; result `[1,H,W]`.
    pub fn channel_dot(&mut self, value: NodeRef, weights: NodeRef) -> NodeRef {
        let v = &self.nodes[value.0].value;
        let wts = &self.nodes[weights.0].value;
        let (c, h, w) = v.chw();
        let (wc, wh, ww) = wts.chw();
        assert_eq!((wc, wh, ww), (c, 1, 1), "channel_dot weight shape");
        let mut data = vec![T::zero(); h * w];
        for ci in 0..c {
            let a = wts.data()[ci];
            for i in 0..h * w {
                data[i] += v.data()[ci * h * w + i] * a;
            }
        }
        let needs = self.needs(value.0) || self.needs(weights.0);
        self.push(
            Tensor::new(vec![1, h, w], data),
            needs,
            Op::ChannelDot {
                value: value.0,
                weights: weights.0,
            },
        )
    }

    pub fn sum_all(&mut self, a: NodeRef) -> NodeRef {
        let s: T = self.nodes[a.0].value.data().iter().copied().sum();
        let needs = self.needs(a.0);
        self.push(Tensor::scalar(s), needs, Op::SumAll(a.0))
    }

    pub fn mean_all(&mut self, a: NodeRef) -> NodeRef {
        let v = &self.nodes[a.0].value;
        let s: T = v.data().iter().copied().sum();
        let mean = s / T::of_usize(v.numel());
        let needs = self.needs(a.0);
        self.push(Tensor::scalar(mean), needs, Op::MeanAll(a.0))
    }

    fn accumulate(&mut self, idx: usize, delta: Tensor<T>) {
        if !self.nodes[idx].needs_grad {
            return;
        }
        match &mut self.nodes[idx].grad {
            Some(g) => {
                for (a, b) in g.data_mut().iter_mut().zip(delta.data()) {
                    *a += *b;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    /// Gradient of the right operand of a broadcast binary op: reduce the
    /// elementwise contribution over the broadcast axes.
    fn reduce_to(&self, contrib: &Tensor<T>, target_shape: &[usize]) -> Tensor<T> {
        let kind = Self::broadcast_kind(contrib.shape(), target_shape);
        match kind {
            Broadcast::Same => contrib.clone(),
            Broadcast::Scalar => {
                let s: T = contrib.data().iter().copied().sum();
                let n = target_shape.iter().product();
                Tensor::new(target_shape.to_vec(), vec![s; n])
            }
            Broadcast::Channel => {
                let (c, h, w) = contrib.chw();
                let mut data = Vec::with_capacity(c);
                for ci in 0..c {
                    data.push(contrib.data()[ci * h * w..(ci + 1) * h * w].iter().copied().sum());
                }
                Tensor::new(vec![c, 1, 1], data)
            }
            Broadcast::Spatial => {
                let (c, h, w) = contrib.chw();
                let mut data = vec![T::zero(); h * w];
                for ci in 0..c {
                    for i in 0..h * w {
                        data[i] += contrib.data()[ci * h * w + i];
                    }
                }
                Tensor::new(vec![1, h, w], data)
            }
        }
    }

    /// Expands a (possibly broadcast) operand to the full output shape.
    fn expand(&self, v: &Tensor<T>, out_shape: &[usize]) -> Tensor<T> {
        if v.shape() == out_shape {
            return v.clone();
        }
        let kind = Self::broadcast_kind(out_shape, v.shape());
        let n: usize = out_shape.iter().product();
        match kind {
            Broadcast::Same => v.clone(),
            Broadcast::Scalar => Tensor::new(out_shape.to_vec(), vec![v.data()[0]; n]),
            Broadcast::Channel => {
                let (c, h, w) = (out_shape[0], out_shape[1], out_shape[2]);
                let mut data = Vec::with_capacity(n);
                for ci in 0..c {
                    for _ in 0..h * w {
                        data.push(v.data()[ci]);
                    }
                }
                Tensor::new(out_shape.to_vec(), data)
            }
            Broadcast::Spatial => {
                let (c, h, w) = (out_shape[0], out_shape[1], out_shape[2]);
                let mut data = Vec::with_capacity(n);
                for _ in 0..c {
                    data.extend_from_slice(&v.data()[..h * w]);
                }
                Tensor::new(out_shape.to_vec(), data)
            }
        }
    }

    /// Runs reverse-mode accumulation from a scalar node.
    pub fn backward(&mut self, loss: NodeRef) {
        assert!(
            self.nodes[loss.0].value.is_scalar(),
            "backward requires a scalar loss node"
        );
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(T::one()));
        for i in (0..self.nodes.len()).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            // Intermediate gradients are consumed here; only leaf gradients
            // remain queryable after backward.
            let g = if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].grad.clone().expect("checked above")
            } else {
                self.nodes[i].grad.take().expect("checked above")
            };
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    if self.needs(a) {
                        self.accumulate(a, g.clone());
                    }
                    if self.needs(b) {
                        let sb = self.nodes[b].value.shape().to_vec();
                        let gb = self.reduce_to(&g, &sb);
                        self.accumulate(b, gb);
                    }
                }
                Op::Sub(a, b) => {
                    if self.needs(a) {
                        self.accumulate(a, g.clone());
                    }
                    if self.needs(b) {
                        let sb = self.nodes[b].value.shape().to_vec();
                        let gb = self.reduce_to(&g, &sb);
                        self.accumulate(b, gb.map(|x| -x));
                    }
                }
                Op::Mul(a, b) => {
                    let out_shape = g.shape().to_vec();
                    if self.needs(a) {
                        let vb = self.expand(&self.nodes[b].value, &out_shape);
                        let ga = Tensor::new(
                            out_shape.clone(),
                            g.data().iter().zip(vb.data()).map(|(x, y)| *x * *y).collect(),
                        );
                        self.accumulate(a, ga);
                    }
                    if self.needs(b) {
                        let contrib = Tensor::new(
                            out_shape.clone(),
                            g.data()
                                .iter()
                                .zip(self.nodes[a].value.data())
                                .map(|(x, y)| *x * *y)
                                .collect(),
                        );
                        let sb = self.nodes[b].value.shape().to_vec();
                        let gb = self.reduce_to(&contrib, &sb);
                        self.accumulate(b, gb);
                    }
                }
                Op::Div(a, b) => {
                    let out_shape = g.shape().to_vec();
                    let vb = self.expand(&self.nodes[b].value, &out_shape);
                    if self.needs(a) {
                        let ga = Tensor::new(
                            out_shape.clone(),
                            g.data().iter().zip(vb.data()).map(|(x, y)| *x / *y).collect(),
                        );
                        self.accumulate(a, ga);
                    }
                    if self.needs(b) {
                        let va = &self.nodes[a].value;
                        let contrib = Tensor::new(
                            out_shape.clone(),
                            g.data()
                                .iter()
                                .zip(va.data())
                                .zip(vb.data())
                                .map(|((gi, ai), bi)| -*gi * *ai / (*bi * *bi))
                                .collect(),
                        );
                        let sb = self.nodes[b].value.shape().to_vec();
                        let gb = self.reduce_to(&contrib, &sb);
                        self.accumulate(b, gb);
                    }
                }
                Op::Neg(a) => self.accumulate(a, g.map(|x| -x)),
                Op::AddConst(a) => self.accumulate(a, g),
                Op::MulConst(a, c) => self.accumulate(a, g.map(|x| x * T::of(c))),
                Op::PowConst(a, p) => {
                    let va = &self.nodes[a].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(gi, xi)| {
                            let x = xi.max(T::of(POW_FLOOR));
                            *gi * T::of(p) * x.powf(T::of(p - 1.0))
                        })
                        .collect();
                    let ga = Tensor::new(va.shape().to_vec(), data);
                    self.accumulate(a, ga);
                }
                Op::MaxConst(a, c) => {
                    // Subgradient 1 at the kink, so zero-initialized ReLU
                    // heads are not dead at the first step.
                    let va = &self.nodes[a].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(gi, xi)| if *xi >= T::of(c) { *gi } else { T::zero() })
                        .collect();
                    self.accumulate(a, Tensor::new(va.shape().to_vec(), data));
                }
                Op::Abs(a) => {
                    let va = &self.nodes[a].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(gi, xi)| *gi * xi.signum() * if *xi == T::zero() { T::zero() } else { T::one() })
                        .collect();
                    self.accumulate(a, Tensor::new(va.shape().to_vec(), data));
                }
                Op::Huber(a, delta) => {
                    let d = T::of(delta);
                    let va = &self.nodes[a].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(gi, xi)| {
                            if xi.abs() < d {
                                *gi * *xi / d
                            } else {
                                *gi * xi.signum()
                            }
                        })
                        .collect();
                    self.accumulate(a, Tensor::new(va.shape().to_vec(), data));
                }
                Op::Ln(a) => {
                    let va = &self.nodes[a].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(gi, xi)| *gi / *xi)
                        .collect();
                    self.accumulate(a, Tensor::new(va.shape().to_vec(), data));
                }
                Op::ClampUnit(a, eps) => {
                    let lo = T::of(eps);
                    let hi = T::of(1.0 - eps);
                    let va = &self.nodes[a].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(gi, xi)| if *xi > lo && *xi < hi { *gi } else { T::zero() })
                        .collect();
                    self.accumulate(a, Tensor::new(va.shape().to_vec(), data));
                }
                Op::LeakyRelu(a, slope) => {
                    let s = T::of(slope);
                    let va = &self.nodes[a].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(gi, xi)| if *xi > T::zero() { *gi } else { *gi * s })
                        .collect();
                    self.accumulate(a, Tensor::new(va.shape().to_vec(), data));
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[i].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(gi, yi)| *gi * *yi * (T::one() - *yi))
                        .collect();
                    let t = Tensor::new(y.shape().to_vec(), data);
                    self.accumulate(a, t);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(gi, yi)| *gi * (T::one() - *yi * *yi))
                        .collect();
                    let t = Tensor::new(y.shape().to_vec(), data);
                    self.accumulate(a, t);
                }
                Op::Sqrt(a) => {
                    let y = &self.nodes[i].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(gi, yi)| *gi / (T::of(2.0) * yi.max(T::of(1e-12))))
                        .collect();
                    let t = Tensor::new(y.shape().to_vec(), data);
                    self.accumulate(a, t);
                }
                Op::SoftmaxAll(a) => {
                    let y = &self.nodes[i].value;
                    let dot: T = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(gi, yi)| *gi * *yi)
                        .sum();
                    let data = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(gi, yi)| *yi * (*gi - dot))
                        .collect();
                    let t = Tensor::new(y.shape().to_vec(), data);
                    self.accumulate(a, t);
                }
                Op::BinEntropy(a) => {
                    let va = &self.nodes[a].value;
                    let data = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(gi, xi)| {
                            let x = xi.clamp(T::of(1e-12), T::of(1.0 - 1e-12));
                            *gi * ((T::one() - x).ln() - x.ln())
                        })
                        .collect();
                    self.accumulate(a, Tensor::new(va.shape().to_vec(), data));
                }
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    stride,
                    pad,
                } => {
                    let (gi, gw, gb) = kernels::conv2d_backward(
                        &self.nodes[input].value,
                        &self.nodes[weight].value,
                        &g,
                        stride,
                        pad,
                    );
                    if self.needs(input) {
                        self.accumulate(input, gi);
                    }
                    if self.needs(weight) {
                        self.accumulate(weight, gw);
                    }
                    if let Some(b) = bias {
                        if self.needs(b) {
                            self.accumulate(b, gb);
                        }
                    }
                }
                Op::AvgPool { input, k } => {
                    let (_, h, w) = self.nodes[input].value.chw();
                    let gi = kernels::avg_pool_backward(&g, k, h, w);
                    self.accumulate(input, gi);
                }
                Op::Upsample2x(input) => {
                    let (_, h, w) = self.nodes[input].value.chw();
                    let gi = kernels::upsample2x_backward(&g, h, w);
                    self.accumulate(input, gi);
                }
                Op::ConcatC(inputs) => {
                    let mut offset = 0;
                    let (_, h, w) = self.nodes[i].value.chw();
                    for idx in inputs {
                        let (c, _, _) = self.nodes[idx].value.chw();
                        let part = Tensor::new(
                            vec![c, h, w],
                            g.data()[offset..offset + c * h * w].to_vec(),
                        );
                        offset += c * h * w;
                        if self.needs(idx) {
                            self.accumulate(idx, part);
                        }
                    }
                }
                Op::SliceC { input, from } => {
                    let (c, h, w) = self.nodes[input].value.chw();
                    let mut gi = Tensor::zeros(vec![c, h, w]);
                    let base = from * h * w;
                    for (k, v) in g.data().iter().enumerate() {
                        gi.data_mut()[base + k] = *v;
                    }
                    self.accumulate(input, gi);
                }
                Op::CropHw { input, y0, h, x0, w } => {
                    let (c, vh, vw) = self.nodes[input].value.chw();
                    let mut gi = Tensor::zeros(vec![c, vh, vw]);
                    for ci in 0..c {
                        for y in 0..h {
                            for x in 0..w {
                                gi.data_mut()[(ci * vh + y0 + y) * vw + x0 + x] =
                                    g.data()[(ci * h + y) * w + x];
                            }
                        }
                    }
                    self.accumulate(input, gi);
                }
                Op::GlobalAvgPool(input) => {
                    let (c, h, w) = self.nodes[input].value.chw();
                    let inv = T::of(1.0 / (h * w) as f64);
                    let mut gi = Tensor::zeros(vec![c, h, w]);
                    for ci in 0..c {
                        let gv = g.data()[ci] * inv;
                        for k in 0..h * w {
                            gi.data_mut()[ci * h * w + k] = gv;
                        }
                    }
                    self.accumulate(input, gi);
                }
                Op::SpatialDot { value, weights } => {
                    let v = self.nodes[value].value.clone();
                    let wts = self.nodes[weights].value.clone();
                    let (c, h, w) = v.chw();
                    if self.needs(value) {
                        let mut gv = Tensor::zeros(vec![c, h, w]);
                        for ci in 0..c {
                            let gc = g.data()[ci];
                            for k in 0..h * w {
                                gv.data_mut()[ci * h * w + k] = gc * wts.data()[k];
                            }
                        }
                        self.accumulate(value, gv);
                    }
                    if self.needs(weights) {
                        let mut gw = Tensor::zeros(vec![1, h, w]);
                        for ci in 0..c {
                            let gc = g.data()[ci];
                            for k in 0..h * w {
                                gw.data_mut()[k] += gc * v.data()[ci * h * w + k];
                            }
                        }
                        self.accumulate(weights, gw);
                    }
                }
                Op::ChannelDot { value, weights } => {
                    let v = self.nodes[value].value.clone();
                    let wts = self.nodes[weights].value.clone();
                    let (c, h, w) = v.chw();
                    if self.needs(value) {
                        let mut gv = Tensor::zeros(vec![c, h, w]);
                        for ci in 0..c {
                            let a = wts.data()[ci];
                            for k in 0..h * w {
                                gv.data_mut()[ci * h * w + k] = g.data()[k] * a;
                            }
                        }
                        self.accumulate(value, gv);
                    }
                    if self.needs(weights) {
                        let mut gw = Tensor::zeros(vec![c, 1, 1]);
                        for ci in 0..c {
                            let mut acc = T::zero();
                            for k in 0..h * w {
                                acc += g.data()[k] * v.data()[ci * h * w + k];
                            }
                            gw.data_mut()[ci] = acc;
                        }
                        self.accumulate(weights, gw);
                    }
                }
                Op::SumAll(a) => {
                    let va = &self.nodes[a].value;
                    let gi = Tensor::filled(va.shape().to_vec(), g.item());
                    self.accumulate(a, gi);
                }
                Op::MeanAll(a) => {
                    let va = &self.nodes[a].value;
                    let gv = g.item() / T::of_usize(va.numel());
                    let gi = Tensor::filled(va.shape().to_vec(), gv);
                    self.accumulate(a, gi);
                }
            }
        }
    }
}

/// Positive floor applied to bases of fractional powers.
const POW_FLOOR: f64 = 1e-12;
