//! Concurrent spatial and channel squeeze-and-excitation, plus the
//! skip-connected variant with an inner-imaging stage.

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::Conv2d;
use crate::params::ParamStore;
use crate::tensor::Tensor;

/// How the channel-gated and spatially-gated copies are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    #[default]
    Max,
    Sum,
}

#[derive(Clone, Debug)]
pub struct Scse {
    channels: usize,
    fc1: Conv2d,
    fc2: Conv2d,
    spatial: Conv2d,
    combine: Combine,
    forced: Option<(f64, f64)>,
}

impl Scse {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize, reduction: usize, combine: Combine) -> Result<Self> {
        if reduction == 0 || channels % reduction != 0 {
            return Err(NnError::Config(format!(
                "channel count {channels} not divisible by reduction {reduction}"
            )));
        }
        let squeezed = channels / reduction;
        Ok(Self {
            channels,
            fc1: Conv2d::new(store, &format!("{name}.cse_fc1"), channels, squeezed, 1, 0, 1, true)?,
            fc2: Conv2d::new(store, &format!("{name}.cse_fc2"), squeezed, channels, 1, 0, 1, true)?,
            spatial: Conv2d::new(store, &format!("{name}.sse"), channels, 1, 1, 0, 1, true)?,
            combine,
            forced: None,
        })
    }

    /// Replaces the learned gates by constants `(channel, spatial)`; `None`
    /// restores the learned heads.
    pub fn force_gates(&mut self, gates: Option<(f64, f64)>) {
        self.forced = gates;
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    pub fn set_combine(&mut self, combine: Combine) {
        self.combine = combine;
    }

    /// Channel gates `(N,C,1,1)` and spatial gates `(N,1,H,W)`, all in [0,1].
    pub fn gates(&self, g: &mut Graph, x: NodeId) -> (NodeId, NodeId) {
        let (n, _, h, w) = g.value(x).dims4();
        if let Some((cv, sv)) = self.forced {
            let cg = g.input(Tensor::full(&[n, self.channels, 1, 1], cv));
            let sg = g.input(Tensor::full(&[n, 1, h, w], sv));
            return (cg, sg);
        }
        let squeezed = g.global_avg_pool(x);
        let z = self.fc1.forward(g, squeezed);
        let z = g.relu(z);
        let z = self.fc2.forward(g, z);
        let cg = g.sigmoid(z);
        let s = self.spatial.forward(g, x);
        let sg = g.sigmoid(s);
        (cg, sg)
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let c = g.shape(x)[1];
        if c != self.channels {
            return Err(NnError::Shape(format!(
                "scSE built for {} channels, got {c}",
                self.channels
            )));
        }
        let (cg, sg) = self.gates(g, x);
        let by_channel = g.mul_broadcast(x, cg);
        let by_space = g.mul_broadcast(x, sg);
        Ok(match self.combine {
            Combine::Max => g.maximum(by_channel, by_space),
            Combine::Sum => g.add(by_channel, by_space),
        })
    }
}

/// `x + scSE(inner(x))` where `inner` is a 1×1 grouped convolution.
#[derive(Clone, Debug)]
pub struct SkipScse {
    pub inner: Conv2d,
    pub scse: Scse,
}

/// Groups used by the inner-imaging convolution.
pub const INNER_GROUPS: usize = 2;

impl SkipScse {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize, reduction: usize, combine: Combine) -> Result<Self> {
        let groups = if channels % INNER_GROUPS == 0 { INNER_GROUPS } else { 1 };
        Ok(Self {
            inner: Conv2d::new(store, &format!("{name}.inner"), channels, channels, 1, 0, groups, true)?,
            scse: Scse::new(store, &format!("{name}.scse"), channels, reduction, combine)?,
        })
    }

    pub fn force_gates(&mut self, gates: Option<(f64, f64)>) {
        self.scse.force_gates(gates);
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let u = self.inner.forward(g, x);
        let excited = self.scse.forward(g, u)?;
        Ok(g.add(excited, x))
    }
}
