use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::{BatchNorm2d, Conv2d, Deconv2x};
use crate::octconv::{OctConv, OctConvConfig, OctFeature};
use crate::params::ParamStore;
use crate::scse::{Combine, SkipScse};

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub alpha: f64,
    pub se_reduction: usize,
}

impl BlockConfig {
    pub fn new(in_channels: usize, out_channels: usize, alpha: f64) -> Self {
        Self {
            in_channels,
            out_channels,
            alpha,
            se_reduction: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(NnError::Config("channel counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(NnError::Config(format!("alpha {} outside [0,1]", self.alpha)));
        }
        if self.se_reduction == 0 || self.out_channels % self.se_reduction != 0 {
            return Err(NnError::Config(format!(
                "out_channels {} not divisible by se_reduction {}",
                self.out_channels, self.se_reduction
            )));
        }
        Ok(())
    }
}

/// Two 3×3 octave convolutions with ReLU, then 2×2 max pooling on both
/// branches.
#[derive(Clone, Debug)]
pub struct EncoderBlock {
    conv1: OctConv,
    conv2: OctConv,
}

impl EncoderBlock {
    /// Input, internal and output octave ratios all equal `cfg.alpha`.
    pub fn new(store: &mut ParamStore, name: &str, cfg: &BlockConfig) -> Result<Self> {
        Self::with_alphas(store, name, cfg, cfg.alpha, cfg.alpha)
    }

    /// Explicit input and output ratios; the intermediate map uses `cfg.alpha`.
    pub fn with_alphas(store: &mut ParamStore, name: &str, cfg: &BlockConfig, alpha_in: f64, alpha_out: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            conv1: OctConv::new(
                store,
                &format!("{name}.conv1"),
                OctConvConfig::new(cfg.in_channels, cfg.out_channels, alpha_in, cfg.alpha),
            )?,
            conv2: OctConv::new(
                store,
                &format!("{name}.conv2"),
                OctConvConfig::new(cfg.out_channels, cfg.out_channels, cfg.alpha, alpha_out),
            )?,
        })
    }

    /// Returns `(skip, down)`: the pre-pooling features and their pooled copy.
    pub fn forward(&self, g: &mut Graph, x: &OctFeature) -> Result<(OctFeature, OctFeature)> {
        let (h, w) = x.spatial(g);
        // a pooled low branch needs the high map divisible by 4; otherwise even is enough
        let div = if self.conv2.out_split().1 > 0 { 4 } else { 2 };
        if h % div != 0 || w % div != 0 {
            return Err(NnError::Shape(format!(
                "encoder block needs spatial dims divisible by {div}, got {h}×{w}"
            )));
        }
        let y = self.conv1.forward(g, x)?;
        let y = y.map(g, |g, n| g.relu(n));
        let y = self.conv2.forward(g, &y)?;
        let skip = y.map(g, |g, n| g.relu(n));
        let down = skip.map(g, |g, n| g.max_pool2(n));
        Ok((skip, down))
    }
}

/// Concatenate → 3×3 conv → batch-norm + leaky ReLU → skip-scSE → 4×4
/// stride-2 deconvolution.
#[derive(Clone, Debug)]
pub struct DecoderBlock {
    pub conv: Conv2d,
    pub bn: BatchNorm2d,
    pub skip_scse: SkipScse,
    pub deconv: Deconv2x,
}

impl DecoderBlock {
    pub fn new(store: &mut ParamStore, name: &str, cfg: &BlockConfig, combine: Combine) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.out_channels;
        Ok(Self {
            conv: Conv2d::new(store, &format!("{name}.conv"), cfg.in_channels, c, 3, 1, 1, false)?,
            bn: BatchNorm2d::new(store, &format!("{name}.bn"), c)?,
            skip_scse: SkipScse::new(store, &format!("{name}.skip_scse"), c, cfg.se_reduction, combine)?,
            deconv: Deconv2x::new(store, &format!("{name}.deconv"), c, c)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId, skip: NodeId) -> Result<NodeId> {
        let xs = g.shape(x).to_vec();
        let ss = g.shape(skip).to_vec();
        if xs[0] != ss[0] || xs[2..] != ss[2..] {
            return Err(NnError::Shape(format!(
                "decoder input {xs:?} and skip {ss:?} differ in batch/spatial dims"
            )));
        }
        let cat = g.concat_channels(&[x, skip]);
        let cin = g.shape(cat)[1];
        let expected = g.store().get(self.conv.weight).shape()[1];
        if cin != expected {
            return Err(NnError::Shape(format!(
                "decoder expects {expected} concatenated channels, got {cin}"
            )));
        }
        let y = self.conv.forward(g, cat);
        let y = self.bn.forward(g, y);
        let y = g.leaky_relu(y, LEAKY_SLOPE);
        let y = self.skip_scse.forward(g, y)?;
        Ok(self.deconv.forward(g, y))
    }
}
