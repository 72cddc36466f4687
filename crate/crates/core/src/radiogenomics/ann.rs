//! One-hidden-layer ReLU regressor trained by full-batch gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnConfig {
    pub hidden: usize,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of the training rows held out for early stopping; unused below 5 rows.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for AnnConfig {
    fn default() -> Self {
        Self {
            hidden: 6,
            lr: 0.05,
            momentum: 0.9,
            epochs: 2000,
            patience: 100,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ann {
    /// `hidden × inputs`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    inputs: usize,
}

struct Grads {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl Ann {
    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    fn hidden_act(&self, x: &[f64], h: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
            *hj = z.max(0.0);
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden()];
        self.hidden_act(x, &mut h);
        h.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2
    }

    fn mse(&self, x: &[Vec<f64>], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(r, t)| (self.predict(r) - t).powi(2)).sum::<f64>() / x.len() as f64
    }

    fn gradients(&self, x: &[Vec<f64>], y: &[f64]) -> Grads {
        let hn = self.hidden();
        let mut g = Grads {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; hn],
            w2: vec![0.0; hn],
            b2: 0.0,
        };
        let n = x.len() as f64;
        let mut h = vec![0.0; hn];
        for (r, t) in x.iter().zip(y) {
            self.hidden_act(r, &mut h);
            let out = h.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2;
            let d = 2.0 * (out - t) / n;
            g.b2 += d;
            for j in 0..hn {
                g.w2[j] += d * h[j];
                if h[j] > 0.0 {
                    let dh = d * self.w2[j];
                    g.b1[j] += dh;
                    for (gw, v) in g.w1[j * self.inputs..(j + 1) * self.inputs].iter_mut().zip(r) {
                        *gw += dh * v;
                    }
                }
            }
        }
        g
    }

    /// Fits standardized targets; early stopping restores the best validation weights.
    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &AnnConfig) -> Result<Self> {
        if cfg.hidden == 0 || !(cfg.lr > 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
            return Err(Error::Config(format!("invalid ANN settings {cfg:?}")));
        }
        let d = x.first().ok_or_else(|| data_err("ANN needs at least one training row"))?.len();
        if x.len() != y.len() || x.iter().any(|r| r.len() != d) {
            return Err(data_err("ANN rows and targets disagree"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = Normal::new(0.0, (2.0 / d.max(1) as f64).sqrt()).expect("positive sd");
        let mut net = Ann {
            w1: (0..cfg.hidden * d).map(|_| init.sample(&mut rng)).collect(),
            b1: vec![0.01; cfg.hidden],
            w2: (0..cfg.hidden).map(|_| init.sample(&mut rng) / (cfg.hidden as f64).sqrt()).collect(),
            b2: 0.0,
            inputs: d,
        };
        let mut idx: Vec<usize> = (0..x.len()).collect();
        let n_val = if x.len() >= 5 { ((x.len() as f64) * cfg.validation_fraction).round() as usize } else { 0 };
        idx.shuffle(&mut rng);
        let (val_idx, tr_idx) = idx.split_at(n_val);
        let pick = |ids: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) { (ids.iter().map(|&i| x[i].clone()).collect(), ids.iter().map(|&i| y[i]).collect()) };
        let (xt, yt) = pick(tr_idx);
        let (xv, yv) = pick(val_idx);
        let mut vel = Grads {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; cfg.hidden],
            w2: vec![0.0; cfg.hidden],
            b2: 0.0,
        };
        let mut best = (f64::INFINITY, net.clone());
        let mut since = 0;
        for _ in 0..cfg.epochs {
            let g = net.gradients(&xt, &yt);
            let step = |p: &mut [f64], v: &mut [f64], g: &[f64]| {
                for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = cfg.momentum * *v - cfg.lr * g;
                    *p += *v;
                }
            };
            step(&mut net.w1, &mut vel.w1, &g.w1);
            step(&mut net.b1, &mut vel.b1, &g.b1);
            step(&mut net.w2, &mut vel.w2, &g.w2);
            vel.b2 = cfg.momentum * vel.b2 - cfg.lr * g.b2;
            net.b2 += vel.b2;
            if n_val > 0 {
                let v = net.mse(&xv, &yv);
                if v < best.0 {
                    best = (v, net.clone());
                    since = 0;
                } else {
                    since += 1;
                    if since >= cfg.patience {
                        break;
                    }
                }
            }
        }
        let out = if n_val > 0 { best.1 } else { net };
        if out.w1.iter().chain(&out.w2).any(|v| !v.is_finite()) || !out.b2.is_finite() {
            return Err(Error::Runtime("ANN training diverged".into()));
        }
        Ok(out)
    }
}
