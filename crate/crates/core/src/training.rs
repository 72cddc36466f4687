//! Network and optimizer settings shared by the generator, discriminator and segmenter.

use octnet::scse::Combine;
use octnet::{Adam, AdamConfig, FcnConfig, Graph, Mode, ParamStore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub depth: usize,
    pub base_channels: usize,
    pub alpha: f64,
    pub se_reduction: usize,
    pub combine: Combine,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            base_channels: 8,
            alpha: 0.25,
            se_reduction: 2,
            combine: Combine::Max,
        }
    }
}

impl NetConfig {
    pub fn fcn(&self, in_channels: usize, out_channels: usize) -> FcnConfig {
        FcnConfig {
            in_channels,
            out_channels,
            depth: self.depth,
            base_channels: self.base_channels,
            alpha: self.alpha,
            se_reduction: self.se_reduction,
            combine: self.combine,
        }
    }
}

/// Adam with coupled L2 weight decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 1e-4,
        }
    }
}

impl OptimConfig {
    pub fn adam(&self, lr: f64) -> Result<Adam> {
        if !(lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Adam::new(AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
            weight_decay: self.weight_decay,
        }))
    }
}

/// One optimizer step: runs `loss_fn` in a training graph, back-propagates,
/// updates weights and folds batch-norm statistics. Returns the loss value.
pub fn train_step(
    store: &mut ParamStore,
    opt: &mut Adam,
    loss_fn: impl FnOnce(&mut Graph) -> Result<octnet::NodeId>,
) -> Result<f64> {
    let (loss, grads, updates) = {
        let mut g = Graph::new(store, Mode::Train);
        let loss = loss_fn(&mut g)?;
        let value = g.value(loss).data()[0];
        (value, g.backward(loss), g.take_stat_updates())
    };
    if !loss.is_finite() {
        return Err(Error::Runtime(format!("training loss became {loss}")));
    }
    opt.step(store, &grads);
    octnet::optim::apply_stat_updates(store, &updates, octnet::layers::BN_MOMENTUM);
    Ok(loss)
}
