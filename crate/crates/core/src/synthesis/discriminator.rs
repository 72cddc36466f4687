//! Plain convolutional encoder-decoder producing a dense realness map.

use octnet::layers::{Conv2d, Deconv2x};
use octnet::{Graph, NodeId, ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};

const SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub levels: usize,
    pub base_channels: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            base_channels: 8,
        }
    }
}

#[derive(Clone, Debug)]
struct Level {
    down: Conv2d,
    up: Deconv2x,
    merge: Conv2d,
}

#[derive(Clone, Debug)]
pub struct Discriminator {
    in_channels: usize,
    levels: Vec<Level>,
    head: Conv2d,
}

impl Discriminator {
    /// Parameters are registered under `prefix`.
    pub fn new(store: &mut ParamStore, prefix: &str, in_channels: usize, cfg: &DiscriminatorConfig) -> Result<Self> {
        if cfg.levels == 0 || cfg.base_channels == 0 {
            return Err(Error::Config("discriminator needs ≥1 level and ≥1 channel".into()));
        }
        let width = |j: usize| cfg.base_channels << j;
        let mut levels = Vec::with_capacity(cfg.levels);
        for j in 0..cfg.levels {
            let cin = if j == 0 { in_channels } else { width(j - 1) };
            let c = width(j);
            // the up path of level j maps the deeper features back to c channels
            let deeper = if j + 1 < cfg.levels { width(j + 1) } else { c };
            levels.push(Level {
                down: Conv2d::new(store, &format!("{prefix}.down{j}"), cin, c, 3, 1, 1, true)?,
                up: Deconv2x::new(store, &format!("{prefix}.up{j}"), deeper, c)?,
                merge: Conv2d::new(store, &format!("{prefix}.merge{j}"), 2 * c, c, 3, 1, 1, true)?,
            });
        }
        let head = Conv2d::new(store, &format!("{prefix}.head"), width(0), 1, 1, 0, 1, true)?;
        Ok(Self {
            in_channels,
            levels,
            head,
        })
    }

    pub fn spatial_multiple(&self) -> usize {
        1 << self.levels.len()
    }

    /// Realness logits, one channel at input resolution.
    pub fn logits(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let (_, c, h, w) = g.value(x).dims4();
        if c != self.in_channels {
            return Err(data_err(format!("discriminator expects {} channels, got {c}", self.in_channels)));
        }
        let m = self.spatial_multiple();
        if h % m != 0 || w % m != 0 {
            return Err(data_err(format!("discriminator input {h}×{w} not divisible by {m}")));
        }
        let mut skips = Vec::with_capacity(self.levels.len());
        let mut y = x;
        for l in &self.levels {
            let f = l.down.forward(g, y);
            let f = g.leaky_relu(f, SLOPE);
            skips.push(f);
            y = g.max_pool2(f);
        }
        for (l, skip) in self.levels.iter().zip(skips).rev() {
            let u = l.up.forward(g, y);
            let u = g.leaky_relu(u, SLOPE);
            let cat = g.concat_channels(&[u, skip]);
            let m = l.merge.forward(g, cat);
            y = g.leaky_relu(m, SLOPE);
        }
        Ok(self.head.forward(g, y))
    }

    /// Realness probabilities in (0, 1).
    pub fn forward(&self, store: &ParamStore, input: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new(store, octnet::Mode::Eval);
        let x = g.input(input.clone());
        let z = self.logits(&mut g, x)?;
        let p = g.sigmoid(z);
        Ok(g.value(p).clone())
    }
}
