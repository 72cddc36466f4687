//! Conditional-GAN objective: adversarial BCE plus λ-weighted L1, and PSNR.

use octnet::{Graph, NodeId, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversarialLoss {
    Bce,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanObjective {
    /// Weight of the L1 term.
    pub lambda: f64,
    pub adversarial: AdversarialLoss,
}

impl Default for GanObjective {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            adversarial: AdversarialLoss::Bce,
        }
    }
}

impl GanObjective {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

const PROB_EPS: f64 = 1e-12;

/// Mean binary cross-entropy of probabilities `p` against a constant label.
pub fn bce(p: &Tensor, label: f64) -> f64 {
    let n = p.numel() as f64;
    p.data()
        .iter()
        .map(|&q| {
            let q = q.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(label * q.ln() + (1.0 - label) * (1.0 - q).ln())
        })
        .sum::<f64>()
        / n
}

pub fn mean_abs_diff(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(data_err(format!("shape mismatch {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.numel() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanLosses {
    pub g_loss: f64,
    pub d_loss: f64,
    /// The unweighted L1 distance.
    pub l1: f64,
}

/// `g = BCE(d_fake, 1) + λ·mean|fake − target|`,
/// `d = ½[BCE(d_real, 1) + BCE(d_fake, 0)]`, on realness probabilities.
pub fn gan_loss(obj: &GanObjective, d_real: &Tensor, d_fake: &Tensor, fake: &Tensor, target: &Tensor) -> Result<GanLosses> {
    obj.validate()?;
    if d_real.shape() != d_fake.shape() {
        return Err(data_err("realness maps differ in shape"));
    }
    let l1 = mean_abs_diff(fake, target)?;
    Ok(GanLosses {
        g_loss: bce(d_fake, 1.0) + obj.lambda * l1,
        d_loss: 0.5 * (bce(d_real, 1.0) + bce(d_fake, 0.0)),
        l1,
    })
}

/// Generator objective inside a graph, on discriminator logits.
pub fn generator_loss_node(g: &mut Graph, obj: &GanObjective, d_fake_logits: NodeId, fake: NodeId, target: NodeId) -> (NodeId, NodeId) {
    let ones = Tensor::full(g.shape(d_fake_logits), 1.0);
    let adv = g.bce_with_logits(d_fake_logits, ones);
    let diff = g.sub(fake, target);
    let abs = g.abs(diff);
    let l1 = g.mean(abs);
    let weighted = g.scale(l1, obj.lambda);
    (g.add(adv, weighted), l1)
}

/// Discriminator objective inside a graph, on logits.
pub fn discriminator_loss_node(g: &mut Graph, d_real_logits: NodeId, d_fake_logits: NodeId) -> NodeId {
    let ones = Tensor::full(g.shape(d_real_logits), 1.0);
    let zeros = Tensor::zeros(g.shape(d_fake_logits));
    let real = g.bce_with_logits(d_real_logits, ones);
    let fake = g.bce_with_logits(d_fake_logits, zeros);
    let sum = g.add(real, fake);
    g.scale(sum, 0.5)
}

/// `10·log10(peak² / MSE)`; identical inputs give `+∞`.
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(data_err(format!("psnr needs equal nonempty inputs, got {} and {}", a.len(), b.len())));
    }
    if !(peak > 0.0) {
        return Err(Error::Config(format!("psnr peak must be positive, got {peak}")));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}
