//! Octave convolution: features split into a full-resolution high-frequency
//! branch and a half-resolution low-frequency branch, with four cross paths.

use crate::error::{NnError, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::Conv2d;
use crate::params::ParamStore;

/// Splits `total` channels into `(high, low)` with `low = round(alpha·total)`.
pub fn split_channels(total: usize, alpha: f64) -> (usize, usize) {
    let low = (alpha * total as f64).round() as usize;
    let low = low.min(total);
    (total - low, low)
}

/// High/low frequency feature bundle inside a [`Graph`].
#[derive(Clone, Copy, Debug)]
pub struct OctFeature {
    pub high: Option<NodeId>,
    pub low: Option<NodeId>,
}

impl OctFeature {
    pub fn plain(x: NodeId) -> Self {
        Self {
            high: Some(x),
            low: None,
        }
    }

    /// Builds a bundle, checking that the low branch is exactly half the
    /// spatial size of the high branch.
    pub fn new(g: &Graph, high: Option<NodeId>, low: Option<NodeId>) -> Result<Self> {
        if high.is_none() && low.is_none() {
            return Err(NnError::Shape("octave feature with neither branch".into()));
        }
        if let (Some(h), Some(l)) = (high, low) {
            let hs = g.shape(h);
            let ls = g.shape(l);
            if hs[0] != ls[0] || hs[2] % 2 != 0 || hs[3] % 2 != 0 || ls[2] != hs[2] / 2 || ls[3] != hs[3] / 2 {
                return Err(NnError::Shape(format!(
                    "low branch {ls:?} is not half of high branch {hs:?}"
                )));
            }
        }
        Ok(Self { high, low })
    }

    /// `(high channels, low channels)`.
    pub fn channels(&self, g: &Graph) -> (usize, usize) {
        (
            self.high.map_or(0, |h| g.shape(h)[1]),
            self.low.map_or(0, |l| g.shape(l)[1]),
        )
    }

    pub fn total_channels(&self, g: &Graph) -> usize {
        let (h, l) = self.channels(g);
        h + l
    }

    pub fn alpha(&self, g: &Graph) -> f64 {
        let (h, l) = self.channels(g);
        l as f64 / (h + l) as f64
    }

    /// Full-resolution `(H, W)`.
    pub fn spatial(&self, g: &Graph) -> (usize, usize) {
        match (self.high, self.low) {
            (Some(h), _) => (g.shape(h)[2], g.shape(h)[3]),
            (None, Some(l)) => (2 * g.shape(l)[2], 2 * g.shape(l)[3]),
            (None, None) => unreachable!("validated on construction"),
        }
    }

    /// Concatenates the high branch with the upsampled low branch into one
    /// full-resolution map.
    pub fn merge(&self, g: &mut Graph) -> NodeId {
        match (self.high, self.low) {
            (Some(h), None) => h,
            (None, Some(l)) => g.upsample2(l),
            (Some(h), Some(l)) => {
                let up = g.upsample2(l);
                g.concat_channels(&[h, up])
            }
            (None, None) => unreachable!("validated on construction"),
        }
    }

    pub fn map(&self, g: &mut Graph, mut f: impl FnMut(&mut Graph, NodeId) -> NodeId) -> Self {
        Self {
            high: self.high.map(|h| f(g, h)),
            low: self.low.map(|l| f(g, l)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OctConvConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub alpha_in: f64,
    pub alpha_out: f64,
    pub kernel: usize,
    pub groups: usize,
}

impl OctConvConfig {
    pub fn new(in_channels: usize, out_channels: usize, alpha_in: f64, alpha_out: f64) -> Self {
        Self {
            in_channels,
            out_channels,
            alpha_in,
            alpha_out,
            kernel: 3,
            groups: 1,
        }
    }
}

/// Octave convolution with paths high→high, high→low (avg-pooled input),
/// low→low and low→high (nearest-upsampled output). Each output branch owns
/// one bias, carried by its same-frequency path.
#[derive(Clone, Debug)]
pub struct OctConv {
    cfg: OctConvConfig,
    in_split: (usize, usize),
    out_split: (usize, usize),
    hh: Option<Conv2d>,
    hl: Option<Conv2d>,
    ll: Option<Conv2d>,
    lh: Option<Conv2d>,
}

impl OctConv {
    pub fn new(store: &mut ParamStore, name: &str, cfg: OctConvConfig) -> Result<Self> {
        for a in [cfg.alpha_in, cfg.alpha_out] {
            if !(0.0..=1.0).contains(&a) {
                return Err(NnError::Config(format!("octave ratio {a} outside [0,1]")));
            }
        }
        let (ih, il) = split_channels(cfg.in_channels, cfg.alpha_in);
        let (oh, ol) = split_channels(cfg.out_channels, cfg.alpha_out);
        let k = cfg.kernel;
        let pad = k / 2;
        let grp = cfg.groups;
        for c in [ih, il, oh, ol] {
            if c % grp != 0 {
                return Err(NnError::Config(format!(
                    "branch width {c} not divisible by {grp} groups"
                )));
            }
        }
        let path = |store: &mut ParamStore, tag: &str, cin: usize, cout: usize, bias: bool| {
            if cin == 0 || cout == 0 {
                Ok(None)
            } else {
                Conv2d::new(store, &format!("{name}.{tag}"), cin, cout, k, pad, grp, bias).map(Some)
            }
        };
        // The same-frequency path carries the branch bias; if it does not
        // exist the cross path does.
        let hh = path(store, "hh", ih, oh, true)?;
        let hl = path(store, "hl", ih, ol, il == 0)?;
        let ll = path(store, "ll", il, ol, true)?;
        let lh = path(store, "lh", il, oh, ih == 0)?;
        Ok(Self {
            cfg,
            in_split: (ih, il),
            out_split: (oh, ol),
            hh,
            hl,
            ll,
            lh,
        })
    }

    pub fn config(&self) -> &OctConvConfig {
        &self.cfg
    }

    pub fn out_split(&self) -> (usize, usize) {
        self.out_split
    }

    pub fn forward(&self, g: &mut Graph, x: &OctFeature) -> Result<OctFeature> {
        let got = x.channels(g);
        if got != self.in_split {
            return Err(NnError::Shape(format!(
                "octave conv expects (high, low) channels {:?}, got {got:?}",
                self.in_split
            )));
        }
        let (h, w) = x.spatial(g);
        let needs_low = self.in_split.1 > 0 || self.out_split.1 > 0;
        if needs_low && (h % 2 != 0 || w % 2 != 0) {
            return Err(NnError::Shape(format!(
                "octave conv with a low branch needs even spatial dims, got {h}×{w}"
            )));
        }
        let hh = match (&self.hh, x.high) {
            (Some(c), Some(xh)) => Some(c.forward(g, xh)),
            _ => None,
        };
        let hl = match (&self.hl, x.high) {
            (Some(c), Some(xh)) => {
                let pooled = g.avg_pool2(xh);
                Some(c.forward(g, pooled))
            }
            _ => None,
        };
        let ll = match (&self.ll, x.low) {
            (Some(c), Some(xl)) => Some(c.forward(g, xl)),
            _ => None,
        };
        let lh = match (&self.lh, x.low) {
            (Some(c), Some(xl)) => {
                let y = c.forward(g, xl);
                Some(g.upsample2(y))
            }
            _ => None,
        };
        let high = sum_opt(g, hh, lh);
        let low = sum_opt(g, ll, hl);
        OctFeature::new(g, high, low)
    }
}

fn sum_opt(g: &mut Graph, a: Option<NodeId>, b: Option<NodeId>) -> Option<NodeId> {
    match (a, b) {
        (Some(a), Some(b)) => Some(g.add(a, b)),
        (a, b) => a.or(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_split_rounds() {
        assert_eq!(split_channels(16, 0.25), (12, 4));
        assert_eq!(split_channels(16, 0.0), (16, 0));
        assert_eq!(split_channels(16, 1.0), (0, 16));
        assert_eq!(split_channels(6, 0.25), (4, 2)); // 1.5 rounds half away from zero
        for c in 1..64 {
            for a in [0.0, 0.1, 0.25, 0.5, 0.75, 1.0] {
                let (h, l) = split_channels(c, a);
                assert_eq!(h + l, c);
            }
        }
    }
}
