//! Support vector regression and classification solved by SMO with
//! second-order working-set selection.

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `exp(−γ‖a − b‖²)`; `gamma = None` means `1 / n_features`.
    Rbf { gamma: Option<f64> },
}

impl Kernel {
    fn resolve(self, n_features: usize) -> ResolvedKernel {
        match self {
            Kernel::Linear => ResolvedKernel::Linear,
            Kernel::Rbf { gamma } => ResolvedKernel::Rbf(gamma.unwrap_or(1.0 / n_features.max(1) as f64)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum ResolvedKernel {
    Linear,
    Rbf(f64),
}

impl ResolvedKernel {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ResolvedKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            ResolvedKernel::Rbf(g) => (-g * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// Tube half-width for regression, in standardized target units.
    pub epsilon: f64,
    pub kernel: Kernel,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            kernel: Kernel::Rbf { gamma: None },
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.epsilon >= 0.0 && self.tol > 0.0) {
            return Err(Error::Config(format!("invalid SVM parameters {self:?}")));
        }
        if let Kernel::Rbf { gamma: Some(g) } = self.kernel {
            if !(g > 0.0) {
                return Err(Error::Config(format!("RBF gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

/// Dual problem `min ½αᵀQα + pᵀα` s.t. `yᵀα = const`, `0 ≤ α ≤ C`, with
/// `Q_ij = y_i y_j K_ij`. Returns `(α, ρ)`.
fn smo(kernel: &dyn Fn(usize, usize) -> f64, p: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let l = p.len();
    let q: Vec<Vec<f64>> = (0..l).map(|i| (0..l).map(|j| y[i] * y[j] * kernel(i, j)).collect()).collect();
    let qd: Vec<f64> = (0..l).map(|i| q[i][i]).collect();
    let mut alpha = vec![0.0; l];
    let mut grad = p.to_vec();
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    for _ in 0..max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for t in 0..l {
            let v = -y[t] * grad[t];
            let movable = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if movable && v >= gmax {
                gmax = v;
                gmax_idx = Some(t);
            }
        }
        let Some(i) = gmax_idx else { break };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = None;
        let mut obj_min = f64::INFINITY;
        for j in 0..l {
            let movable = if y[j] > 0.0 { !lower(alpha[j]) } else { !upper(alpha[j]) };
            if !movable {
                continue;
            }
            let v = y[j] * grad[j];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = qd[i] + qd[j] - 2.0 * y[i] * y[j] * q[i][j];
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    best = Some(j);
                }
            }
        }
        let Some(j) = best else { break };
        if gmax + gmax2 < tol {
            break;
        }
        let (ai, aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * q[i][j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * q[i][j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for k in 0..l {
            grad[k] += q[i][k] * di + q[j][k] * dj;
        }
    }
    // offset from free variables, or the midpoint of the feasible interval
    let (mut ub, mut lb, mut sum, mut nfree) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..l {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            nfree += 1;
            sum += yg;
        }
    }
    let rho = if nfree > 0 { sum / nfree as f64 } else { (ub + lb) / 2.0 };
    (alpha, rho)
}

fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().ok_or_else(|| data_err("SVM needs at least one training row"))?.len();
    if x.iter().any(|r| r.len() != d) {
        return Err(data_err("ragged SVM training rows"));
    }
    Ok(d)
}

/// ε-insensitive support vector regression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Svr {
    kernel: ResolvedKernel,
    support: Vec<Vec<f64>>,
    coef: Vec<f64>,
    bias: f64,
}

impl Svr {
    pub fn fit(x: &[Vec<f64>], z: &[f64], params: &SvmParams) -> Result<Self> {
        params.validate()?;
        let d = check_rows(x)?;
        if z.len() != x.len() {
            return Err(data_err(format!("{} rows but {} targets", x.len(), z.len())));
        }
        let n = x.len();
        let kernel = params.kernel.resolve(d);
        let k: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| kernel.eval(a, b)).collect()).collect();
        let mut p = Vec::with_capacity(2 * n);
        p.extend(z.iter().map(|v| params.epsilon - v));
        p.extend(z.iter().map(|v| params.epsilon + v));
        let y: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
        let (alpha, rho) = smo(&|i, j| k[i % n][j % n], &p, &y, params.c, params.tol, params.max_iter);
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for i in 0..n {
            let c = alpha[i] - alpha[i + n];
            if c != 0.0 {
                support.push(x[i].clone());
                coef.push(c);
            }
        }
        Ok(Self {
            kernel,
            support,
            coef,
            bias: -rho,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.support.iter().zip(&self.coef).map(|(s, c)| c * self.kernel.eval(s, x)).sum::<f64>() + self.bias
    }

    /// Primal weight vector; only meaningful for the linear kernel.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != ResolvedKernel::Linear {
            return None;
        }
        let d = self.support.first().map_or(0, Vec::len);
        let mut w = vec![0.0; d];
        for (s, c) in self.support.iter().zip(&self.coef) {
            for (wi, si) in w.iter_mut().zip(s) {
                *wi += c * si;
            }
        }
        Some(w)
    }
}

/// Binary C-SVC on labels ±1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BinarySvc {
    support: Vec<Vec<f64>>,
    coef: Vec<f64>,
    bias: f64,
}

impl BinarySvc {
    fn fit(x: &[&Vec<f64>], y: &[f64], kernel: ResolvedKernel, params: &SvmParams) -> Self {
        let n = x.len();
        let k: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| kernel.eval(a, b)).collect()).collect();
        let (alpha, rho) = smo(&|i, j| k[i][j], &vec![-1.0; n], y, params.c, params.tol, params.max_iter);
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for i in 0..n {
            if alpha[i] != 0.0 {
                support.push(x[i].clone());
                coef.push(alpha[i] * y[i]);
            }
        }
        Self { support, coef, bias: -rho }
    }

    fn decision(&self, kernel: ResolvedKernel, x: &[f64]) -> f64 {
        self.support.iter().zip(&self.coef).map(|(s, c)| c * kernel.eval(s, x)).sum::<f64>() + self.bias
    }
}

/// Multi-class C-SVC by one-vs-one voting; ties go to the lower class index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Svc {
    kernel: ResolvedKernel,
    classes: Vec<usize>,
    pairs: Vec<(usize, usize, BinarySvc)>,
}

impl Svc {
    pub fn fit(x: &[Vec<f64>], labels: &[usize], params: &SvmParams) -> Result<Self> {
        params.validate()?;
        let d = check_rows(x)?;
        if labels.len() != x.len() {
            return Err(data_err(format!("{} rows but {} labels", x.len(), labels.len())));
        }
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(data_err("classifier training set holds a single class"));
        }
        let kernel = params.kernel.resolve(d);
        let mut pairs = Vec::new();
        for (a, &ca) in classes.iter().enumerate() {
            for &cb in &classes[a + 1..] {
                let idx: Vec<usize> = (0..x.len()).filter(|&i| labels[i] == ca || labels[i] == cb).collect();
                let xs: Vec<&Vec<f64>> = idx.iter().map(|&i| &x[i]).collect();
                let ys: Vec<f64> = idx.iter().map(|&i| if labels[i] == ca { 1.0 } else { -1.0 }).collect();
                pairs.push((ca, cb, BinarySvc::fit(&xs, &ys, kernel, params)));
            }
        }
        Ok(Self { kernel, classes, pairs })
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.classes.len()];
        for (a, b, m) in &self.pairs {
            let winner = if m.decision(self.kernel, x) > 0.0 { a } else { b };
            let k = self.classes.iter().position(|c| c == winner).unwrap();
            votes[k] += 1;
        }
        let mut best = 0;
        for k in 1..votes.len() {
            if votes[k] > votes[best] {
                best = k;
            }
        }
        self.classes[best]
    }
}
