//! UNet-topology fully convolutional network: octave-convolution encoder,
//! skip-scSE decoder.
//!
//! Channel plan for depth `d` and base width `b` (`c_j = b·2^j`):
//!
//! * encoder `j`: `c_{j-1} → c_j` (input channels for `j = 0`), octave ratio
//!   0 on the network input and on the deepest encoder output;
//! * bottleneck: two plain 3×3 convolutions `c_{d-1} → c_{d-1}` at `H/2^d`;
//! * decoder `j` (deepest first): concatenates the running map with the
//!   pooled output of encoder `j`, `2·c_j → c_{j-1}` (`b` for `j = 0`), and
//!   doubles the resolution;
//! * head: 1×1 convolution over the last decoder output concatenated with the
//!   merged high/low features of the first encoder.

use serde::{Deserialize, Serialize};

use crate::blocks::{BlockConfig, DecoderBlock, EncoderBlock};
use crate::error::{NnError, Result};
use crate::graph::{Graph, Mode, NodeId};
use crate::layers::Conv2d;
use crate::octconv::{OctConv, OctConvConfig, OctFeature};
use crate::params::ParamStore;
use crate::scse::Combine;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcnConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub depth: usize,
    pub base_channels: usize,
    pub alpha: f64,
    pub se_reduction: usize,
    #[serde(default)]
    pub combine: Combine,
}

impl FcnConfig {
    pub fn new(in_channels: usize, out_channels: usize, depth: usize, base_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            depth,
            base_channels,
            alpha: 0.25,
            se_reduction: 2,
            combine: Combine::Max,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn level_channels(&self, j: usize) -> usize {
        self.base_channels << j
    }

    /// Output width of decoder `j`.
    pub fn decoder_out(&self, j: usize) -> usize {
        if j == 0 {
            self.base_channels
        } else {
            self.level_channels(j - 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(NnError::Config("depth must be at least 1".into()));
        }
        if self.in_channels == 0 || self.out_channels == 0 || self.base_channels == 0 {
            return Err(NnError::Config("channel counts must be positive".into()));
        }
        Ok(())
    }

    /// Spatial dims must be divisible by this.
    pub fn spatial_multiple(&self) -> usize {
        1 << self.depth
    }
}

#[derive(Clone, Debug)]
pub struct Fcn {
    cfg: FcnConfig,
    encoders: Vec<EncoderBlock>,
    bottleneck: [OctConv; 2],
    /// Deepest first.
    decoders: Vec<DecoderBlock>,
    head: Conv2d,
}

impl Fcn {
    pub fn new(store: &mut ParamStore, cfg: FcnConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.depth;
        let mut encoders = Vec::with_capacity(d);
        for j in 0..d {
            let cin = if j == 0 { cfg.in_channels } else { cfg.level_channels(j - 1) };
            let block = BlockConfig {
                in_channels: cin,
                out_channels: cfg.level_channels(j),
                alpha: cfg.alpha,
                se_reduction: cfg.se_reduction,
            };
            let a_in = if j == 0 { 0.0 } else { cfg.alpha };
            let a_out = if j == d - 1 { 0.0 } else { cfg.alpha };
            encoders.push(EncoderBlock::with_alphas(store, &format!("enc{j}"), &block, a_in, a_out)?);
        }
        let cb = cfg.level_channels(d - 1);
        let bottleneck = [
            OctConv::new(store, "bottleneck.conv1", OctConvConfig::new(cb, cb, 0.0, 0.0))?,
            OctConv::new(store, "bottleneck.conv2", OctConvConfig::new(cb, cb, 0.0, 0.0))?,
        ];
        let mut decoders = Vec::with_capacity(d);
        for j in (0..d).rev() {
            let block = BlockConfig {
                in_channels: 2 * cfg.level_channels(j),
                out_channels: cfg.decoder_out(j),
                alpha: 0.0,
                se_reduction: cfg.se_reduction,
            };
            decoders.push(DecoderBlock::new(store, &format!("dec{j}"), &block, cfg.combine)?);
        }
        let head = Conv2d::new(store, "head", 2 * cfg.base_channels, cfg.out_channels, 1, 0, 1, true)?;
        Ok(Self {
            cfg,
            encoders,
            bottleneck,
            decoders,
            head,
        })
    }

    pub fn config(&self) -> &FcnConfig {
        &self.cfg
    }

    pub fn head(&self) -> &Conv2d {
        &self.head
    }

    pub fn decoders_mut(&mut self) -> &mut [DecoderBlock] {
        &mut self.decoders
    }

    /// Forces every skip-scSE gate in the decoder path to constants.
    pub fn force_gates(&mut self, gates: Option<(f64, f64)>) {
        for d in &mut self.decoders {
            d.skip_scse.force_gates(gates);
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let (_, c, h, w) = g.value(x).dims4();
        if c != self.cfg.in_channels {
            return Err(NnError::Shape(format!(
                "network expects {} input channels, got {c}",
                self.cfg.in_channels
            )));
        }
        let m = self.cfg.spatial_multiple();
        if h % m != 0 || w % m != 0 {
            return Err(NnError::Shape(format!(
                "input {h}×{w} not divisible by 2^{} = {m}",
                self.cfg.depth
            )));
        }
        let mut feat = OctFeature::plain(x);
        let mut skips = Vec::with_capacity(self.encoders.len());
        let mut downs = Vec::with_capacity(self.encoders.len());
        for enc in &self.encoders {
            let (skip, down) = enc.forward(g, &feat)?;
            skips.push(skip);
            downs.push(down);
            feat = down;
        }
        for conv in &self.bottleneck {
            feat = conv.forward(g, &feat)?;
            feat = feat.map(g, |g, n| g.relu(n));
        }
        let mut y = feat.merge(g);
        for (dec, down) in self.decoders.iter().zip(downs.iter().rev()) {
            let link = down.merge(g);
            y = dec.forward(g, y, link)?;
        }
        let top = skips[0].merge(g);
        let cat = g.concat_channels(&[y, top]);
        Ok(self.head.forward(g, cat))
    }

    /// Evaluation-mode forward on a batch tensor.
    pub fn predict(&self, store: &ParamStore, input: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new(store, Mode::Eval);
        let x = g.input(input.clone());
        let y = self.forward(&mut g, x)?;
        Ok(g.value(y).clone())
    }
}
