//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! A [`Graph`] is built fresh for every forward pass. Parameters are read from
//! a borrowed [`ParamStore`]; after [`Graph::backward`] the returned
//! [`Gradients`] are indexed by [`ParamId`] so an optimizer can update the
//! store once the graph has been dropped.

use std::collections::HashMap;

use crate::kernels::{col2im, gemm, im2col, Trans, Window};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        stride: usize,
        pad: usize,
        groups: usize,
    },
    ConvTranspose2d {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        stride: usize,
        pad: usize,
    },
    MaxPool2 {
        x: NodeId,
        argmax: Vec<usize>,
    },
    AvgPool2 {
        x: NodeId,
    },
    Upsample2 {
        x: NodeId,
    },
    Concat {
        parts: Vec<NodeId>,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MulBroadcast {
        x: NodeId,
        g: NodeId,
    },
    Maximum(NodeId, NodeId),
    Relu(NodeId),
    LeakyRelu(NodeId, f64),
    Sigmoid(NodeId),
    Abs(NodeId),
    Scale(NodeId, f64),
    GlobalAvgPool(NodeId),
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Mean(NodeId),
    BceWithLogits {
        x: NodeId,
        target: Tensor,
    },
    CrossEntropy {
        x: NodeId,
        labels: Vec<usize>,
        weights: Vec<f64>,
        denom: f64,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Batch statistics observed during a training-mode batch-norm forward.
#[derive(Clone, Debug)]
pub struct StatUpdate {
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub batch_mean: Vec<f64>,
    /// Unbiased batch variance.
    pub batch_var: Vec<f64>,
}

pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    params: HashMap<ParamId, NodeId>,
    mode: Mode,
    stat_updates: Vec<StatUpdate>,
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(id.index()).and_then(|g| g.as_ref())
    }

    pub fn node(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn params(&self) -> &[Option<Tensor>] {
        &self.params
    }

    /// Drops parameter gradients for which `keep` is false, so an optimizer
    /// step leaves those parameters untouched.
    pub fn retain_params(&mut self, keep: impl Fn(ParamId) -> bool) {
        for (i, g) in self.params.iter_mut().enumerate() {
            if !keep(ParamId(i)) {
                *g = None;
            }
        }
    }
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore, mode: Mode) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            params: HashMap::new(),
            mode,
            stat_updates: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn take_stat_updates(&mut self) -> Vec<StatUpdate> {
        std::mem::take(&mut self.stat_updates)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[NodeId]) -> NodeId {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input; no gradient is tracked for it.
    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Input whose gradient is wanted (finite-difference checks, saliency).
    pub fn input_with_grad(&mut self, t: Tensor) -> NodeId {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: true,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.params.get(&id) {
            return n;
        }
        self.nodes.push(Node {
            value: self.store.get(id).clone(),
            op: Op::Leaf,
            requires_grad: self.store.is_trainable(id),
        });
        let n = NodeId(self.nodes.len() - 1);
        self.params.insert(id, n);
        n
    }

    // ---- convolutions -------------------------------------------------

    /// Grouped 2D convolution. `w` is `(C_out, C_in/groups, k, k)`.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        stride: usize,
        pad: usize,
        groups: usize,
    ) -> NodeId {
        let xv = self.value(x);
        let wv = self.value(w);
        let (n, cin, h, wd) = xv.dims4();
        let (cout, cin_g, k, k2) = wv.dims4();
        assert_eq!(k, k2, "square kernels only");
        assert!(groups >= 1 && cin % groups == 0 && cout % groups == 0);
        assert_eq!(cin / groups, cin_g, "conv2d: input channels {cin} vs weight {:?}", wv.shape());
        let cout_g = cout / groups;
        let win = Window {
            channels: cin_g,
            height: h,
            width: wd,
            kernel: k,
            stride,
            pad,
        };
        let (oh, ow) = (win.out_h(), win.out_w());
        let mut out = Tensor::zeros(&[n, cout, oh, ow]);
        let mut cols = vec![0.0; win.col_rows() * win.col_cols()];
        let kk = win.col_rows();
        let ohw = oh * ow;
        for s in 0..n {
            for gi in 0..groups {
                let img = &xv.data()[(s * cin + gi * cin_g) * h * wd..(s * cin + (gi + 1) * cin_g) * h * wd];
                im2col(img, &win, &mut cols);
                let wslice = &wv.data()[gi * cout_g * kk..(gi + 1) * cout_g * kk];
                let dst = &mut out.data_mut()[(s * cout + gi * cout_g) * ohw..(s * cout + (gi + 1) * cout_g) * ohw];
                gemm(cout_g, kk, ohw, wslice, Trans::No, &cols, Trans::No, 0.0, dst);
            }
        }
        if let Some(b) = b {
            add_channel_bias(&mut out, self.value(b));
        }
        let mut inputs = vec![x, w];
        inputs.extend(b);
        self.push(
            out,
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
                groups,
            },
            &inputs,
        )
    }

    /// Transposed convolution. `w` is `(C_in, C_out, k, k)`; output size is
    /// `(H - 1)·stride - 2·pad + k`.
    pub fn conv_transpose2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
        stride: usize,
        pad: usize,
    ) -> NodeId {
        let xv = self.value(x);
        let wv = self.value(w);
        let (n, cin, h, wd) = xv.dims4();
        let (wcin, cout, k, _) = wv.dims4();
        assert_eq!(cin, wcin, "conv_transpose2d channel mismatch");
        let oh = (h - 1) * stride + k - 2 * pad;
        let ow = (wd - 1) * stride + k - 2 * pad;
        let win = Window {
            channels: cout,
            height: oh,
            width: ow,
            kernel: k,
            stride,
            pad,
        };
        debug_assert_eq!(win.out_h(), h);
        let kk = win.col_rows();
        let hw = h * wd;
        let mut cols = vec![0.0; kk * hw];
        let mut out = Tensor::zeros(&[n, cout, oh, ow]);
        let per_out = cout * oh * ow;
        for s in 0..n {
            let img = &xv.data()[s * cin * hw..(s + 1) * cin * hw];
            // cols = W^T (kk × cin) · X (cin × hw)
            gemm(kk, cin, hw, wv.data(), Trans::Yes, img, Trans::No, 0.0, &mut cols);
            col2im(&cols, &win, &mut out.data_mut()[s * per_out..(s + 1) * per_out]);
        }
        if let Some(b) = b {
            add_channel_bias(&mut out, self.value(b));
        }
        let mut inputs = vec![x, w];
        inputs.extend(b);
        self.push(out, Op::ConvTranspose2d { x, w, b, stride, pad }, &inputs)
    }

    // ---- resampling ---------------------------------------------------

    /// 2×2 max pooling with stride 2 (trailing odd rows/cols are dropped).
    pub fn max_pool2(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dims4();
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        let mut argmax = vec![0usize; n * c * oh * ow];
        let src = xv.data();
        for p in 0..n * c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let base = p * h * w;
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if src[i] > src[best] {
                            best = i;
                        }
                    }
                    let o = p * oh * ow + oy * ow + ox;
                    out.data_mut()[o] = src[best];
                    argmax[o] = best;
                }
            }
        }
        self.push(out, Op::MaxPool2 { x, argmax }, &[x])
    }

    /// 2×2 average pooling with stride 2.
    pub fn avg_pool2(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dims4();
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        let src = xv.data();
        for p in 0..n * c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let i = p * h * w + 2 * oy * w + 2 * ox;
                    out.data_mut()[p * oh * ow + oy * ow + ox] =
                        0.25 * (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]);
                }
            }
        }
        self.push(out, Op::AvgPool2 { x }, &[x])
    }

    /// Nearest-neighbour ×2 upsampling.
    pub fn upsample2(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dims4();
        let (oh, ow) = (2 * h, 2 * w);
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        let src = xv.data();
        for p in 0..n * c {
            for y in 0..oh {
                for xx in 0..ow {
                    out.data_mut()[p * oh * ow + y * ow + xx] = src[p * h * w + (y / 2) * w + xx / 2];
                }
            }
        }
        self.push(out, Op::Upsample2 { x }, &[x])
    }

    pub fn concat_channels(&mut self, parts: &[NodeId]) -> NodeId {
        let values: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
        let out = Tensor::cat_channels(&values).expect("concat_channels shape mismatch");
        self.push(
            out,
            Op::Concat {
                parts: parts.to_vec(),
            },
            parts,
        )
    }

    // ---- elementwise --------------------------------------------------

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, Op::Mul(a, b), &[a, b])
    }

    /// Multiplies an NCHW tensor by a gate tensor whose dims are each either
    /// equal to the input's or 1 (e.g. `(N,C,1,1)` or `(N,1,H,W)`).
    pub fn mul_broadcast(&mut self, x: NodeId, g: NodeId) -> NodeId {
        let xv = self.value(x);
        let gv = self.value(g);
        let map = BroadcastMap::new(xv.shape(), gv.shape());
        let mut out = xv.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v *= gv.data()[map.index(i)];
        }
        self.push(out, Op::MulBroadcast { x, g }, &[x, g])
    }

    pub fn maximum(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).zip_map(self.value(b), f64::max);
        self.push(out, Op::Maximum(a, b), &[a, b])
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x), &[x])
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu(x, slope), &[x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x), &[x])
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(f64::abs);
        self.push(out, Op::Abs(x), &[x])
    }

    pub fn scale(&mut self, x: NodeId, k: f64) -> NodeId {
        let out = self.value(x).map(|v| v * k);
        self.push(out, Op::Scale(x, k), &[x])
    }

    /// `(N,C,H,W) -> (N,C,1,1)` spatial mean.
    pub fn global_avg_pool(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dims4();
        let hw = h * w;
        let data = (0..n * c)
            .map(|p| xv.data()[p * hw..(p + 1) * hw].iter().sum::<f64>() / hw as f64)
            .collect();
        let out = Tensor::from_vec(&[n, c, 1, 1], data).expect("gap shape");
        self.push(out, Op::GlobalAvgPool(x), &[x])
    }

    /// Batch normalisation over (N,H,W) per channel.
    ///
    /// In [`Mode::Train`] batch statistics are used and a [`StatUpdate`] is
    /// queued; in [`Mode::Eval`] the running statistics are used.
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: ParamId,
        beta: ParamId,
        running_mean: ParamId,
        running_var: ParamId,
        eps: f64,
    ) -> NodeId {
        let gamma_n = self.param(gamma);
        let beta_n = self.param(beta);
        let xv = self.value(x);
        let (n, c, h, w) = xv.dims4();
        let hw = h * w;
        let m = (n * hw) as f64;
        let batch_stats = self.mode == Mode::Train;
        let (mean, var): (Vec<f64>, Vec<f64>) = if batch_stats {
            (0..c)
                .map(|ch| {
                    let mut s = 0.0;
                    for b in 0..n {
                        s += xv.data()[(b * c + ch) * hw..(b * c + ch + 1) * hw].iter().sum::<f64>();
                    }
                    let mu = s / m;
                    let mut v = 0.0;
                    for b in 0..n {
                        v += xv.data()[(b * c + ch) * hw..(b * c + ch + 1) * hw]
                            .iter()
                            .map(|x| (x - mu) * (x - mu))
                            .sum::<f64>();
                    }
                    (mu, v / m)
                })
                .unzip()
        } else {
            (
                self.store.get(running_mean).data().to_vec(),
                self.store.get(running_var).data().to_vec(),
            )
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let g = self.value(gamma_n).data().to_vec();
        let bt = self.value(beta_n).data().to_vec();
        let mut xhat = vec![0.0; xv.numel()];
        let mut out = Tensor::zeros(xv.shape());
        for b in 0..n {
            for ch in 0..c {
                for p in 0..hw {
                    let i = (b * c + ch) * hw + p;
                    let xh = (xv.data()[i] - mean[ch]) * inv_std[ch];
                    xhat[i] = xh;
                    out.data_mut()[i] = g[ch] * xh + bt[ch];
                }
            }
        }
        if batch_stats {
            let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
            self.stat_updates.push(StatUpdate {
                running_mean,
                running_var,
                batch_mean: mean,
                batch_var: var.iter().map(|v| v * unbias).collect(),
            });
        }
        self.push(
            out,
            Op::BatchNorm {
                x,
                gamma: gamma_n,
                beta: beta_n,
                xhat,
                inv_std,
                batch_stats,
            },
            &[x, gamma_n, beta_n],
        )
    }

    // ---- reductions and losses ---------------------------------------

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let out = Tensor::scalar(self.value(x).mean());
        self.push(out, Op::Mean(x), &[x])
    }

    /// Mean binary cross-entropy of `sigmoid(x)` against `target`.
    pub fn bce_with_logits(&mut self, x: NodeId, target: Tensor) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.shape(), target.shape(), "bce target shape");
        let loss = xv
            .data()
            .iter()
            .zip(target.data())
            .map(|(&z, &t)| softplus(z) - t * z)
            .sum::<f64>()
            / xv.numel() as f64;
        self.push(Tensor::scalar(loss), Op::BceWithLogits { x, target }, &[x])
    }

    /// Class-weighted per-pixel cross-entropy over NCHW logits; the mean is
    /// normalised by the summed weights of the targets.
    pub fn cross_entropy(&mut self, x: NodeId, labels: Vec<usize>, weights: Vec<f64>) -> NodeId {
        let xv = self.value(x);
        let (n, c, h, w) = xv.dims4();
        let hw = h * w;
        assert_eq!(labels.len(), n * hw, "one label per pixel");
        assert_eq!(weights.len(), c, "one weight per class");
        let mut total = 0.0;
        let mut denom = 0.0;
        for b in 0..n {
            for p in 0..hw {
                let at = |k: usize| (b * c + k) * hw + p;
                let m = (0..c).map(|k| xv.data()[at(k)]).fold(f64::NEG_INFINITY, f64::max);
                let lse = m + (0..c).map(|k| (xv.data()[at(k)] - m).exp()).sum::<f64>().ln();
                let y = labels[b * hw + p];
                total += weights[y] * (lse - xv.data()[at(y)]);
                denom += weights[y];
            }
        }
        let denom = denom.max(f64::MIN_POSITIVE);
        self.push(
            Tensor::scalar(total / denom),
            Op::CrossEntropy {
                x,
                labels,
                weights,
                denom,
            },
            &[x],
        )
    }

    // ---- backward -----------------------------------------------------

    /// Back-propagates from a scalar node.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        assert_eq!(self.value(loss).numel(), 1, "backward needs a scalar");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(node, &gy, &mut grads);
            grads[idx] = Some(gy);
        }
        let mut params = vec![None; self.store.len()];
        for (&pid, &nid) in &self.params {
            if self.store.is_trainable(pid) {
                params[pid.index()] = grads[nid.0].clone();
            }
        }
        Gradients {
            nodes: grads,
            params,
        }
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn backprop_node(&self, node: &Node, gy: &Tensor, grads: &mut [Option<Tensor>]) {
        let acc = |grads: &mut [Option<Tensor>], id: NodeId, g: Tensor| match &mut grads[id.0] {
            Some(t) => t.add_assign(&g),
            slot @ None => *slot = Some(g),
        };
        match &node.op {
            Op::Leaf => {}
            &Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
                groups,
            } => {
                let xv = self.value(x);
                let wv = self.value(w);
                let (n, cin, h, wd) = xv.dims4();
                let (cout, cin_g, k, _) = wv.dims4();
                let cout_g = cout / groups;
                let win = Window {
                    channels: cin_g,
                    height: h,
                    width: wd,
                    kernel: k,
                    stride,
                    pad,
                };
                let kk = win.col_rows();
                let ohw = win.col_cols();
                let mut cols = vec![0.0; kk * ohw];
                let mut dcols = vec![0.0; kk * ohw];
                let need_x = self.wants(x);
                let need_w = self.wants(w);
                let mut dx = need_x.then(|| Tensor::zeros(xv.shape()));
                let mut dw = need_w.then(|| Tensor::zeros(wv.shape()));
                for s in 0..n {
                    for gi in 0..groups {
                        let gys = &gy.data()[(s * cout + gi * cout_g) * ohw..(s * cout + (gi + 1) * cout_g) * ohw];
                        if let Some(dw) = dw.as_mut() {
                            let img = &xv.data()[(s * cin + gi * cin_g) * h * wd..(s * cin + (gi + 1) * cin_g) * h * wd];
                            im2col(img, &win, &mut cols);
                            let dst = &mut dw.data_mut()[gi * cout_g * kk..(gi + 1) * cout_g * kk];
                            gemm(cout_g, ohw, kk, gys, Trans::No, &cols, Trans::Yes, 1.0, dst);
                        }
                        if let Some(dx) = dx.as_mut() {
                            let wslice = &wv.data()[gi * cout_g * kk..(gi + 1) * cout_g * kk];
                            gemm(kk, cout_g, ohw, wslice, Trans::Yes, gys, Trans::No, 0.0, &mut dcols);
                            let dst = &mut dx.data_mut()[(s * cin + gi * cin_g) * h * wd..(s * cin + (gi + 1) * cin_g) * h * wd];
                            col2im(&dcols, &win, dst);
                        }
                    }
                }
                if let Some(dx) = dx {
                    acc(grads, x, dx);
                }
                if let Some(dw) = dw {
                    acc(grads, w, dw);
                }
                if let Some(b) = b.filter(|b| self.wants(*b)) {
                    acc(grads, b, channel_sums(gy));
                }
            }
            &Op::ConvTranspose2d { x, w, b, stride, pad } => {
                let xv = self.value(x);
                let wv = self.value(w);
                let (n, cin, h, wd) = xv.dims4();
                let (_, cout, k, _) = wv.dims4();
                let (_, _, oh, ow) = gy.dims4();
                let win = Window {
                    channels: cout,
                    height: oh,
                    width: ow,
                    kernel: k,
                    stride,
                    pad,
                };
                let kk = win.col_rows();
                let hw = h * wd;
                let mut cols = vec![0.0; kk * hw];
                let need_x = self.wants(x);
                let need_w = self.wants(w);
                let mut dx = need_x.then(|| Tensor::zeros(xv.shape()));
                let mut dw = need_w.then(|| Tensor::zeros(wv.shape()));
                let per_out = cout * oh * ow;
                for s in 0..n {
                    im2col(&gy.data()[s * per_out..(s + 1) * per_out], &win, &mut cols);
                    if let Some(dx) = dx.as_mut() {
                        // dX (cin × hw) = W (cin × kk) · cols (kk × hw)
                        gemm(cin, kk, hw, wv.data(), Trans::No, &cols, Trans::No, 0.0, &mut dx.data_mut()[s * cin * hw..(s + 1) * cin * hw]);
                    }
                    if let Some(dw) = dw.as_mut() {
                        // dW (cin × kk) += X (cin × hw) · cols^T (hw × kk)
                        let img = &xv.data()[s * cin * hw..(s + 1) * cin * hw];
                        gemm(cin, hw, kk, img, Trans::No, &cols, Trans::Yes, 1.0, dw.data_mut());
                    }
                }
                if let Some(dx) = dx {
                    acc(grads, x, dx);
                }
                if let Some(dw) = dw {
                    acc(grads, w, dw);
                }
                if let Some(b) = b.filter(|b| self.wants(*b)) {
                    acc(grads, b, channel_sums(gy));
                }
            }
            Op::MaxPool2 { x, argmax } => {
                let mut dx = Tensor::zeros(self.value(*x).shape());
                for (o, &i) in argmax.iter().enumerate() {
                    dx.data_mut()[i] += gy.data()[o];
                }
                acc(grads, *x, dx);
            }
            &Op::AvgPool2 { x } => {
                let xv = self.value(x);
                let (n, c, h, w) = xv.dims4();
                let (oh, ow) = (h / 2, w / 2);
                let mut dx = Tensor::zeros(xv.shape());
                for p in 0..n * c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = 0.25 * gy.data()[p * oh * ow + oy * ow + ox];
                            let i = p * h * w + 2 * oy * w + 2 * ox;
                            let d = dx.data_mut();
                            d[i] += g;
                            d[i + 1] += g;
                            d[i + w] += g;
                            d[i + w + 1] += g;
                        }
                    }
                }
                acc(grads, x, dx);
            }
            &Op::Upsample2 { x } => {
                let xv = self.value(x);
                let (n, c, h, w) = xv.dims4();
                let (oh, ow) = (2 * h, 2 * w);
                let mut dx = Tensor::zeros(xv.shape());
                for p in 0..n * c {
                    for y in 0..oh {
                        for xx in 0..ow {
                            dx.data_mut()[p * h * w + (y / 2) * w + xx / 2] += gy.data()[p * oh * ow + y * ow + xx];
                        }
                    }
                }
                acc(grads, x, dx);
            }
            Op::Concat { parts } => {
                let (n, ctot, h, w) = gy.dims4();
                let hw = h * w;
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).shape()[1];
                    if self.wants(p) {
                        let mut d = Vec::with_capacity(n * c * hw);
                        for b in 0..n {
                            let start = (b * ctot + offset) * hw;
                            d.extend_from_slice(&gy.data()[start..start + c * hw]);
                        }
                        acc(grads, p, Tensor::from_vec(&[n, c, h, w], d).expect("concat grad"));
                    }
                    offset += c;
                }
            }
            &Op::Add(a, b) => {
                if self.wants(a) {
                    acc(grads, a, gy.clone());
                }
                if self.wants(b) {
                    acc(grads, b, gy.clone());
                }
            }
            &Op::Sub(a, b) => {
                if self.wants(a) {
                    acc(grads, a, gy.clone());
                }
                if self.wants(b) {
                    acc(grads, b, gy.map(|v| -v));
                }
            }
            &Op::Mul(a, b) => {
                if self.wants(a) {
                    acc(grads, a, gy.zip_map(self.value(b), |g, y| g * y));
                }
                if self.wants(b) {
                    acc(grads, b, gy.zip_map(self.value(a), |g, x| g * x));
                }
            }
            &Op::MulBroadcast { x, g } => {
                let xv = self.value(x);
                let gv = self.value(g);
                let map = BroadcastMap::new(xv.shape(), gv.shape());
                if self.wants(x) {
                    let mut dx = gy.clone();
                    for (i, v) in dx.data_mut().iter_mut().enumerate() {
                        *v *= gv.data()[map.index(i)];
                    }
                    acc(grads, x, dx);
                }
                if self.wants(g) {
                    let mut dg = Tensor::zeros(gv.shape());
                    for i in 0..xv.numel() {
                        dg.data_mut()[map.index(i)] += gy.data()[i] * xv.data()[i];
                    }
                    acc(grads, g, dg);
                }
            }
            &Op::Maximum(a, b) => {
                let av = self.value(a);
                let bv = self.value(b);
                if self.wants(a) {
                    let mut d = gy.clone();
                    for (i, v) in d.data_mut().iter_mut().enumerate() {
                        if av.data()[i] < bv.data()[i] {
                            *v = 0.0;
                        }
                    }
                    acc(grads, a, d);
                }
                if self.wants(b) {
                    let mut d = gy.clone();
                    for (i, v) in d.data_mut().iter_mut().enumerate() {
                        if av.data()[i] >= bv.data()[i] {
                            *v = 0.0;
                        }
                    }
                    acc(grads, b, d);
                }
            }
            &Op::Relu(x) => {
                let d = gy.zip_map(self.value(x), |g, v| if v > 0.0 { g } else { 0.0 });
                acc(grads, x, d);
            }
            &Op::LeakyRelu(x, slope) => {
                let d = gy.zip_map(self.value(x), |g, v| if v > 0.0 { g } else { slope * g });
                acc(grads, x, d);
            }
            &Op::Sigmoid(x) => {
                let d = gy.zip_map(&node.value, |g, s| g * s * (1.0 - s));
                acc(grads, x, d);
            }
            &Op::Abs(x) => {
                let d = gy.zip_map(self.value(x), |g, v| g * v.signum() * f64::from(u8::from(v != 0.0)));
                acc(grads, x, d);
            }
            &Op::Scale(x, k) => acc(grads, x, gy.map(|g| g * k)),
            &Op::GlobalAvgPool(x) => {
                let xv = self.value(x);
                let (n, c, h, w) = xv.dims4();
                let hw = h * w;
                let mut dx = Tensor::zeros(xv.shape());
                for p in 0..n * c {
                    let g = gy.data()[p] / hw as f64;
                    dx.data_mut()[p * hw..(p + 1) * hw].fill(g);
                }
                acc(grads, x, dx);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let xv = self.value(*x);
                let (n, c, h, w) = xv.dims4();
                let hw = h * w;
                let m = (n * hw) as f64;
                let g = self.value(*gamma).data();
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for b in 0..n {
                    for ch in 0..c {
                        for p in 0..hw {
                            let i = (b * c + ch) * hw + p;
                            dgamma[ch] += gy.data()[i] * xhat[i];
                            dbeta[ch] += gy.data()[i];
                        }
                    }
                }
                if self.wants(*x) {
                    let mut dx = Tensor::zeros(xv.shape());
                    for b in 0..n {
                        for ch in 0..c {
                            for p in 0..hw {
                                let i = (b * c + ch) * hw + p;
                                dx.data_mut()[i] = if *batch_stats {
                                    g[ch] * inv_std[ch] / m
                                        * (m * gy.data()[i] - dbeta[ch] - xhat[i] * dgamma[ch])
                                } else {
                                    g[ch] * inv_std[ch] * gy.data()[i]
                                };
                            }
                        }
                    }
                    acc(grads, *x, dx);
                }
                if self.wants(*gamma) {
                    acc(grads, *gamma, Tensor::from_vec(&[c], dgamma).expect("bn"));
                }
                if self.wants(*beta) {
                    acc(grads, *beta, Tensor::from_vec(&[c], dbeta).expect("bn"));
                }
            }
            &Op::Mean(x) => {
                let xv = self.value(x);
                acc(grads, x, Tensor::full(xv.shape(), gy.data()[0] / xv.numel() as f64));
            }
            Op::BceWithLogits { x, target } => {
                let xv = self.value(*x);
                let k = gy.data()[0] / xv.numel() as f64;
                let d = xv.zip_map(target, |z, t| k * (sigmoid(z) - t));
                acc(grads, *x, d);
            }
            Op::CrossEntropy {
                x,
                labels,
                weights,
                denom,
            } => {
                let xv = self.value(*x);
                let (n, c, h, w) = xv.dims4();
                let hw = h * w;
                let sm = xv.softmax_channels();
                let mut dx = Tensor::zeros(xv.shape());
                let k = gy.data()[0] / denom;
                for b in 0..n {
                    for p in 0..hw {
                        let y = labels[b * hw + p];
                        let wy = weights[y] * k;
                        for cls in 0..c {
                            let i = (b * c + cls) * hw + p;
                            let t = if cls == y { 1.0 } else { 0.0 };
                            dx.data_mut()[i] = wy * (sm.data()[i] - t);
                        }
                    }
                }
                acc(grads, *x, dx);
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn add_channel_bias(out: &mut Tensor, bias: &Tensor) {
    let (n, c, h, w) = out.dims4();
    let hw = h * w;
    for b in 0..n {
        for ch in 0..c {
            let bv = bias.data()[ch];
            for v in &mut out.data_mut()[(b * c + ch) * hw..(b * c + ch + 1) * hw] {
                *v += bv;
            }
        }
    }
}

fn channel_sums(gy: &Tensor) -> Tensor {
    let (n, c, h, w) = gy.dims4();
    let hw = h * w;
    let mut s = vec![0.0; c];
    for b in 0..n {
        for (ch, acc) in s.iter_mut().enumerate() {
            *acc += gy.data()[(b * c + ch) * hw..(b * c + ch + 1) * hw].iter().sum::<f64>();
        }
    }
    Tensor::from_vec(&[c], s).expect("bias grad")
}

/// Maps a flat index of the full shape onto the flat index of a broadcast
/// operand.
struct BroadcastMap {
    full: Vec<usize>,
    strides: Vec<usize>,
}

impl BroadcastMap {
    fn new(full: &[usize], small: &[usize]) -> Self {
        assert_eq!(full.len(), small.len(), "broadcast rank mismatch");
        let mut strides = vec![0; small.len()];
        let mut acc = 1;
        for d in (0..small.len()).rev() {
            assert!(
                small[d] == full[d] || small[d] == 1,
                "cannot broadcast {small:?} to {full:?}"
            );
            strides[d] = if small[d] == 1 { 0 } else { acc };
            acc *= small[d];
        }
        Self {
            full: full.to_vec(),
            strides,
        }
    }

    fn index(&self, mut i: usize) -> usize {
        let mut out = 0;
        for d in (0..self.full.len()).rev() {
            let coord = i % self.full[d];
            i /= self.full[d];
            out += coord * self.strides[d];
        }
        out
    }
}
