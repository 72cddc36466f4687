//! Direct-loop reference implementations used as independent oracles for the
//! GEMM/graph code paths, plus a central finite-difference gradient checker.
#![allow(dead_code)]

use octnet::graph::{Graph, Mode, NodeId};
use octnet::{ParamStore, Tensor};

fn at4(shape: &[usize], n: usize, c: usize, y: usize, x: usize) -> usize {
    ((n * shape[1] + c) * shape[2] + y) * shape[3] + x
}

/// Direct grouped convolution, stride 1, zero padding.
pub fn conv2d(x: &Tensor, w: &Tensor, b: Option<&Tensor>, pad: usize, groups: usize) -> Tensor {
    let (n, cin, h, wd) = x.dims4();
    let (cout, cin_g, k, _) = w.dims4();
    let oh = h + 2 * pad - k + 1;
    let ow = wd + 2 * pad - k + 1;
    let cout_g = cout / groups;
    let mut out = Tensor::zeros(&[n, cout, oh, ow]);
    let os = out.shape().to_vec();
    for s in 0..n {
        for co in 0..cout {
            let gi = co / cout_g;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.map_or(0.0, |b| b.data()[co]);
                    for ci in 0..cin_g {
                        let c_in = gi * cin_g + ci;
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = oy as isize + ky as isize - pad as isize;
                                let ix = ox as isize + kx as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc += x.data()[at4(x.shape(), s, c_in, iy as usize, ix as usize)]
                                    * w.data()[at4(w.shape(), co, ci, ky, kx)];
                            }
                        }
                    }
                    out.data_mut()[at4(&os, s, co, oy, ox)] = acc;
                }
            }
        }
    }
    let _ = cin;
    out
}

/// Direct scatter-form transposed convolution; `w` is `(C_in, C_out, k, k)`.
pub fn conv_transpose2d(x: &Tensor, w: &Tensor, b: Option<&Tensor>, stride: usize, pad: usize) -> Tensor {
    let (n, cin, h, wd) = x.dims4();
    let (_, cout, k, _) = w.dims4();
    let oh = (h - 1) * stride + k - 2 * pad;
    let ow = (wd - 1) * stride + k - 2 * pad;
    let mut out = Tensor::zeros(&[n, cout, oh, ow]);
    let os = out.shape().to_vec();
    for s in 0..n {
        for ci in 0..cin {
            for iy in 0..h {
                for ix in 0..wd {
                    let v = x.data()[at4(x.shape(), s, ci, iy, ix)];
                    for co in 0..cout {
                        for ky in 0..k {
                            for kx in 0..k {
                                let oy = (iy * stride + ky) as isize - pad as isize;
                                let ox = (ix * stride + kx) as isize - pad as isize;
                                if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                    continue;
                                }
                                out.data_mut()[at4(&os, s, co, oy as usize, ox as usize)] +=
                                    v * w.data()[at4(w.shape(), ci, co, ky, kx)];
                            }
                        }
                    }
                }
            }
        }
    }
    if let Some(b) = b {
        for s in 0..n {
            for co in 0..cout {
                for y in 0..oh {
                    for xx in 0..ow {
                        out.data_mut()[at4(&os, s, co, y, xx)] += b.data()[co];
                    }
                }
            }
        }
    }
    out
}

fn pool(x: &Tensor, f: impl Fn([f64; 4]) -> f64) -> Tensor {
    let (n, c, h, w) = x.dims4();
    let mut out = Tensor::zeros(&[n, c, h / 2, w / 2]);
    let os = out.shape().to_vec();
    for s in 0..n {
        for ch in 0..c {
            for y in 0..h / 2 {
                for xx in 0..w / 2 {
                    let g = |dy, dx| x.data()[at4(x.shape(), s, ch, 2 * y + dy, 2 * xx + dx)];
                    out.data_mut()[at4(&os, s, ch, y, xx)] = f([g(0, 0), g(0, 1), g(1, 0), g(1, 1)]);
                }
            }
        }
    }
    out
}

pub fn avg_pool2(x: &Tensor) -> Tensor {
    pool(x, |v| v.iter().sum::<f64>() / 4.0)
}

pub fn max_pool2(x: &Tensor) -> Tensor {
    pool(x, |v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

pub fn upsample2(x: &Tensor) -> Tensor {
    let (n, c, h, w) = x.dims4();
    let mut out = Tensor::zeros(&[n, c, 2 * h, 2 * w]);
    let os = out.shape().to_vec();
    for s in 0..n {
        for ch in 0..c {
            for y in 0..2 * h {
                for xx in 0..2 * w {
                    out.data_mut()[at4(&os, s, ch, y, xx)] = x.data()[at4(x.shape(), s, ch, y / 2, xx / 2)];
                }
            }
        }
    }
    out
}

pub fn add(a: &Tensor, b: &Tensor) -> Tensor {
    a.zip_map(b, |x, y| x + y)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn leaky(x: &Tensor, slope: f64) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { slope * v })
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn cat(a: &Tensor, b: &Tensor) -> Tensor {
    Tensor::cat_channels(&[a, b]).unwrap()
}

/// Batch norm with fixed statistics.
pub fn batch_norm_fixed(x: &Tensor, mean: &[f64], var: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Tensor {
    let (n, c, h, w) = x.dims4();
    let mut out = x.clone();
    for s in 0..n {
        for ch in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    let i = at4(x.shape(), s, ch, y, xx);
                    out.data_mut()[i] = gamma[ch] * (x.data()[i] - mean[ch]) / (var[ch] + eps).sqrt() + beta[ch];
                }
            }
        }
    }
    out
}

/// scSE with max combination, gates computed directly.
pub fn scse(x: &Tensor, store: &ParamStore, prefix: &str, forced: Option<(f64, f64)>) -> Tensor {
    let (n, c, h, w) = x.dims4();
    let p = |s: &str| store.get(store.id_of(&format!("{prefix}.{s}")).unwrap()).clone();
    let mut out = x.clone();
    for s in 0..n {
        let (cg, sg): (Vec<f64>, Vec<f64>) = match forced {
            Some((cv, sv)) => (vec![cv; c], vec![sv; h * w]),
            None => {
                let (w1, b1, w2, b2) = (p("cse_fc1.weight"), p("cse_fc1.bias"), p("cse_fc2.weight"), p("cse_fc2.bias"));
                let (ws, bs) = (p("sse.weight"), p("sse.bias"));
                let mean: Vec<f64> = (0..c)
                    .map(|ch| (0..h * w).map(|q| x.data()[(s * c + ch) * h * w + q]).sum::<f64>() / (h * w) as f64)
                    .collect();
                let r = w1.shape()[0];
                let hidden: Vec<f64> = (0..r)
                    .map(|i| (b1.data()[i] + (0..c).map(|ch| w1.data()[i * c + ch] * mean[ch]).sum::<f64>()).max(0.0))
                    .collect();
                let cg = (0..c)
                    .map(|ch| sigmoid(b2.data()[ch] + (0..r).map(|i| w2.data()[ch * r + i] * hidden[i]).sum::<f64>()))
                    .collect();
                let sg = (0..h * w)
                    .map(|q| sigmoid(bs.data()[0] + (0..c).map(|ch| ws.data()[ch] * x.data()[(s * c + ch) * h * w + q]).sum::<f64>()))
                    .collect();
                (cg, sg)
            }
        };
        for ch in 0..c {
            for q in 0..h * w {
                let i = (s * c + ch) * h * w + q;
                out.data_mut()[i] = (x.data()[i] * cg[ch]).max(x.data()[i] * sg[q]);
            }
        }
    }
    out
}

pub fn param(store: &ParamStore, name: &str) -> Tensor {
    store
        .get(store.id_of(name).unwrap_or_else(|| panic!("missing parameter {name}")))
        .clone()
}

pub fn opt_param(store: &ParamStore, name: &str) -> Option<Tensor> {
    store.id_of(name).map(|id| store.get(id).clone())
}

/// Skip-scSE: `x + scse(inner(x))`.
pub fn skip_scse(x: &Tensor, store: &ParamStore, prefix: &str, forced: Option<(f64, f64)>) -> Tensor {
    let w = param(store, &format!("{prefix}.inner.weight"));
    let b = param(store, &format!("{prefix}.inner.bias"));
    let groups = x.shape()[1] / w.shape()[1];
    let u = conv2d(x, &w, Some(&b), 0, groups);
    add(&scse(&u, store, &format!("{prefix}.scse"), forced), x)
}

/// Decoder block in evaluation mode (running statistics).
pub fn decoder_eval(x: &Tensor, skip: &Tensor, store: &ParamStore, prefix: &str, forced: Option<(f64, f64)>) -> Tensor {
    let c = cat(x, skip);
    let y = conv2d(&c, &param(store, &format!("{prefix}.conv.weight")), None, 1, 1);
    let bn = |s: &str| param(store, &format!("{prefix}.bn.{s}")).into_data();
    let y = batch_norm_fixed(&y, &bn("running_mean"), &bn("running_var"), &bn("gamma"), &bn("beta"), 1e-5);
    let y = leaky(&y, 0.01);
    let y = skip_scse(&y, store, &format!("{prefix}.skip_scse"), forced);
    conv_transpose2d(
        &y,
        &param(store, &format!("{prefix}.deconv.weight")),
        Some(&param(store, &format!("{prefix}.deconv.bias"))),
        2,
        1,
    )
}

/// Plain 3×3 convolution path of an octave conv whose ratios are both zero.
pub fn plain_conv(x: &Tensor, store: &ParamStore, prefix: &str) -> Tensor {
    conv2d(
        x,
        &param(store, &format!("{prefix}.hh.weight")),
        opt_param(store, &format!("{prefix}.hh.bias")).as_ref(),
        1,
        1,
    )
}

/// Depth-1 UNet with every octave ratio zero, written layer by layer.
pub fn plain_unet_depth1(x: &Tensor, store: &ParamStore) -> Tensor {
    let e = relu(&plain_conv(x, store, "enc0.conv1"));
    let skip = relu(&plain_conv(&e, store, "enc0.conv2"));
    let down = max_pool2(&skip);
    let b = relu(&plain_conv(&down, store, "bottleneck.conv1"));
    let b = relu(&plain_conv(&b, store, "bottleneck.conv2"));
    let d = decoder_eval(&b, &down, store, "dec0", None);
    conv2d(&cat(&d, &skip), &param(store, "head.weight"), Some(&param(store, "head.bias")), 0, 1)
}

/// Four-path octave convolution evaluated directly.
pub fn octconv(xh: Option<&Tensor>, xl: Option<&Tensor>, store: &ParamStore, prefix: &str) -> (Option<Tensor>, Option<Tensor>) {
    let path = |tag: &str, input: &Tensor| {
        opt_param(store, &format!("{prefix}.{tag}.weight")).map(|w| {
            let b = opt_param(store, &format!("{prefix}.{tag}.bias"));
            conv2d(input, &w, b.as_ref(), 1, 1)
        })
    };
    let hh = xh.and_then(|x| path("hh", x));
    let hl = xh.and_then(|x| path("hl", &avg_pool2(x)));
    let ll = xl.and_then(|x| path("ll", x));
    let lh = xl.and_then(|x| path("lh", x)).map(|t| upsample2(&t));
    let sum = |a: Option<Tensor>, b: Option<Tensor>| match (a, b) {
        (Some(a), Some(b)) => Some(add(&a, &b)),
        (a, b) => a.or(b),
    };
    (sum(hh, lh), sum(ll, hl))
}

/// Result of a finite-difference comparison.
#[derive(Debug)]
pub struct GradCheck {
    pub rel_error: f64,
    pub checked: usize,
}

fn rel(a: &[f64], n: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nn: f64 = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-12)
}

/// Compares analytic gradients of `sum(f(x) ⊙ probe)` against central
/// differences, with respect to the input and every trainable parameter.
pub fn grad_check(
    store: &ParamStore,
    mode: Mode,
    input: &Tensor,
    probe_seed: u64,
    f: &dyn Fn(&mut Graph, NodeId) -> NodeId,
) -> GradCheck {
    use rand::SeedableRng;
    let eval = |store: &ParamStore, x: &Tensor, probe: Option<&Tensor>| -> (f64, Tensor) {
        let mut g = Graph::new(store, mode);
        let xi = g.input(x.clone());
        let y = f(&mut g, xi);
        let out = g.value(y).clone();
        let s = probe.map_or(0.0, |p| out.data().iter().zip(p.data()).map(|(a, b)| a * b).sum());
        (s, out)
    };
    let (_, shape_probe) = eval(store, input, None);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(probe_seed);
    let probe = Tensor::randn(shape_probe.shape(), 1.0, &mut rng);

    let mut g = Graph::new(store, mode);
    let xi = g.input_with_grad(input.clone());
    let y = f(&mut g, xi);
    let pn = g.input(probe.clone());
    let prod = g.mul(y, pn);
    let loss = g.mean(prod);
    let grads = g.backward(loss);
    let scale = probe.numel() as f64;

    let h = 1e-5;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let gx = grads.node(xi).cloned().unwrap_or_else(|| Tensor::zeros(input.shape()));
    for i in 0..input.numel() {
        let mut xp = input.clone();
        xp.data_mut()[i] += h;
        let mut xm = input.clone();
        xm.data_mut()[i] -= h;
        let d = (eval(store, &xp, Some(&probe)).0 - eval(store, &xm, Some(&probe)).0) / (2.0 * h);
        numeric.push(d);
        analytic.push(gx.data()[i] * scale);
    }
    for id in store.ids() {
        if !store.is_trainable(id) {
            continue;
        }
        let gp = grads.param(id).cloned().unwrap_or_else(|| Tensor::zeros(store.get(id).shape()));
        for i in 0..store.get(id).numel() {
            let mut sp = store.clone();
            sp.get_mut(id).data_mut()[i] += h;
            let mut sm = store.clone();
            sm.get_mut(id).data_mut()[i] -= h;
            let d = (eval(&sp, input, Some(&probe)).0 - eval(&sm, input, Some(&probe)).0) / (2.0 * h);
            numeric.push(d);
            analytic.push(gp.data()[i] * scale);
        }
    }
    GradCheck {
        rel_error: rel(&analytic, &numeric),
        checked: numeric.len(),
    }
}
