use serde::{Deserialize, Serialize};

use crate::graph::{Gradients, StatUpdate};
use crate::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty added to the gradient (coupled weight decay).
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Adam over every trainable entry of one [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Option<Tensor>>,
    v: Vec<Option<Tensor>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        self.m.resize(store.len(), None);
        self.v.resize(store.len(), None);
        for id in store.ids().collect::<Vec<_>>() {
            let Some(g) = grads.param(id) else { continue };
            let i = id.index();
            let p = store.get_mut(id);
            let m = self.m[i].get_or_insert_with(|| Tensor::zeros(p.shape()));
            let v = self.v[i].get_or_insert_with(|| Tensor::zeros(p.shape()));
            for k in 0..p.numel() {
                let gk = g.data()[k] + c.weight_decay * p.data()[k];
                let mk = &mut m.data_mut()[k];
                *mk = c.beta1 * *mk + (1.0 - c.beta1) * gk;
                let vk = &mut v.data_mut()[k];
                *vk = c.beta2 * *vk + (1.0 - c.beta2) * gk * gk;
                let mhat = m.data()[k] / bc1;
                let vhat = v.data()[k] / bc2;
                p.data_mut()[k] -= c.lr * mhat / (vhat.sqrt() + c.eps);
            }
        }
    }
}

/// Folds batch statistics into running mean/variance:
/// `running = (1 - momentum)·running + momentum·batch`.
pub fn apply_stat_updates(store: &mut ParamStore, updates: &[StatUpdate], momentum: f64) {
    for u in updates {
        for (r, b) in store.get_mut(u.running_mean).data_mut().iter_mut().zip(&u.batch_mean) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
        for (r, b) in store.get_mut(u.running_var).data_mut().iter_mut().zip(&u.batch_var) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
    }
}
