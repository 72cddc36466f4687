//! Thin parameterised wrappers over graph ops.

use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub pad: usize,
    pub groups: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        pad: usize,
        groups: usize,
        bias: bool,
    ) -> Result<Self> {
        let cin_g = cin / groups;
        let weight = store.kaiming(
            &format!("{name}.weight"),
            &[cout, cin_g, kernel, kernel],
            cin_g * kernel * kernel,
        )?;
        let bias = if bias {
            Some(store.zeros(&format!("{name}.bias"), &[cout])?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            pad,
            groups,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let w = g.param(self.weight);
        let b = self.bias.map(|b| g.param(b));
        g.conv2d(x, w, b, 1, self.pad, self.groups)
    }
}

/// 4×4, stride-2, padding-1 transposed convolution: doubles H and W.
#[derive(Clone, Debug)]
pub struct Deconv2x {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Deconv2x {
    pub fn new(store: &mut ParamStore, name: &str, cin: usize, cout: usize) -> Result<Self> {
        let weight = store.kaiming(&format!("{name}.weight"), &[cin, cout, 4, 4], cout * 16)?;
        let bias = store.zeros(&format!("{name}.bias"), &[cout])?;
        Ok(Self { weight, bias })
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        g.conv_transpose2d(x, w, Some(b), 2, 1)
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm2d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm2d {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.add(&format!("{name}.gamma"), Tensor::full(&[channels], 1.0))?,
            beta: store.zeros(&format!("{name}.beta"), &[channels])?,
            running_mean: store.add_buffer(&format!("{name}.running_mean"), Tensor::zeros(&[channels]))?,
            running_var: store.add_buffer(&format!("{name}.running_var"), Tensor::full(&[channels], 1.0))?,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> NodeId {
        g.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            BN_EPS,
        )
    }
}
