//! Adversarial training of one synthesis task.

use std::io::Write;

use octnet::{Graph, Mode, ParamId, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::case::Modality;
use crate::error::{data_err, Error, Result};
use crate::slices::{stack_slices, PreparedCase};
use crate::synthesis::discriminator::{Discriminator, DiscriminatorConfig};
use crate::synthesis::loss::{discriminator_loss_node, generator_loss_node, psnr, GanObjective};
use crate::synthesis::model::{generator_graph, SynthesisTask, Synthesizer};
use crate::training::{NetConfig, OptimConfig};

const DISC_PREFIX: &str = "disc";
const HOLDOUT_BATCH: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanTrainConfig {
    pub net: NetConfig,
    pub discriminator: DiscriminatorConfig,
    pub objective: GanObjective,
    pub optim: OptimConfig,
    pub lr_g: f64,
    pub lr_d: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    /// Holdout PSNR is measured every this many steps (and at the first and last).
    pub psnr_every: usize,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            objective: GanObjective::default(),
            optim: OptimConfig::default(),
            lr_g: 5e-3,
            lr_d: 5e-3,
            steps: 300,
            batch: 4,
            seed: 0,
            psnr_every: 50,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if !(self.lr_g > 0.0 && self.lr_d > 0.0) {
            return Err(Error::Config(format!("learning rates must be positive, got {} and {}", self.lr_g, self.lr_d)));
        }
        if self.batch == 0 || self.psnr_every == 0 {
            return Err(Error::Config("batch and psnr_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLosses {
    pub step: usize,
    pub g_loss: f64,
    pub d_loss: f64,
    pub l1: f64,
}

/// The discriminator together with the store that holds its weights.
#[derive(Clone, Debug)]
pub struct TrainedDiscriminator {
    pub store: ParamStore,
    pub net: Discriminator,
}

impl TrainedDiscriminator {
    /// Realness map for `candidate` conditioned on `sources`.
    pub fn realness(&self, sources: &Tensor, candidate: &Tensor) -> Result<Tensor> {
        if sources.shape()[0] != candidate.shape()[0] || sources.shape()[2..] != candidate.shape()[2..] {
            return Err(data_err(format!(
                "sources {:?} and candidate {:?} disagree",
                sources.shape(),
                candidate.shape()
            )));
        }
        let x = Tensor::cat_channels(&[sources, candidate])?;
        self.net.forward(&self.store, &x)
    }
}

#[derive(Clone, Debug)]
pub struct GanTraining {
    pub synthesizer: Synthesizer,
    pub discriminator: TrainedDiscriminator,
    pub losses: Vec<StepLosses>,
    /// `(step, holdout PSNR)`; step 0 is the untrained generator.
    pub psnr_curve: Vec<(usize, f64)>,
    /// Holdout PSNR of the best source channel copied as-is.
    pub baseline_psnr: Option<f64>,
}

impl GanTraining {
    pub fn write_loss_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["step", "g_loss", "d_loss", "l1", "psnr_holdout"])?;
        let psnr_at = |s: usize| {
            self.psnr_curve
                .iter()
                .find(|(k, _)| *k == s)
                .map(|(_, p)| format!("{p:.6}"))
                .unwrap_or_default()
        };
        if self.psnr_curve.first().is_some_and(|(k, _)| *k == 0) {
            wtr.write_record(["0", "", "", "", &psnr_at(0)])?;
        }
        for l in &self.losses {
            wtr.write_record([
                l.step.to_string(),
                format!("{:.6}", l.g_loss),
                format!("{:.6}", l.d_loss),
                format!("{:.6}", l.l1),
                psnr_at(l.step),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Paired slices `(case, z)` whose cases carry every source and the target.
fn paired_slices(cases: &[PreparedCase], task: &SynthesisTask) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (c, case) in cases.iter().enumerate() {
        if task.sources.iter().all(|m| case.has(*m)) && case.has(task.target) {
            out.extend(case.informative_slices().into_iter().map(|z| (c, z)));
        }
    }
    out
}

/// Fixed evaluation batches over the holdout slices, with their noise.
pub struct Holdout {
    batches: Vec<(Tensor, Tensor, Tensor)>,
}

impl Holdout {
    pub fn new(cases: &[PreparedCase], task: &SynthesisTask, seed: u64) -> Result<Option<Self>> {
        let pairs = paired_slices(cases, task);
        if pairs.is_empty() {
            return Ok(None);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x401d);
        let mut batches = Vec::new();
        for chunk in pairs.chunks(HOLDOUT_BATCH) {
            let src = stack_slices(chunk.iter().map(|&(c, z)| (&cases[c], z)), &task.sources)?;
            let tgt = stack_slices(chunk.iter().map(|&(c, z)| (&cases[c], z)), &[task.target])?;
            let (b, _, h, w) = src.dims4();
            let noise = Tensor::randn(&[b, task.noise_channels, h, w], 1.0, &mut rng);
            batches.push((src, noise, tgt));
        }
        Ok(Some(Self { batches }))
    }

    fn targets(&self) -> Vec<f64> {
        self.batches.iter().flat_map(|(_, _, t)| t.data().iter().copied()).collect()
    }

    pub fn psnr_with(&self, gen: impl Fn(&Tensor, &Tensor) -> Result<Tensor>) -> Result<f64> {
        let mut pred = Vec::new();
        for (s, n, _) in &self.batches {
            pred.extend_from_slice(gen(s, n)?.data());
        }
        psnr(&pred, &self.targets(), 1.0)
    }

    /// Best PSNR among the source channels used unchanged as the prediction.
    pub fn baseline_psnr(&self) -> Result<f64> {
        let s = self.batches[0].0.shape()[1];
        let tgt = self.targets();
        let mut best = f64::NEG_INFINITY;
        for k in 0..s {
            let mut pred = Vec::new();
            for (src, _, _) in &self.batches {
                let (b, c, h, w) = src.dims4();
                for i in 0..b {
                    let off = (i * c + k) * h * w;
                    pred.extend_from_slice(&src.data()[off..off + h * w]);
                }
            }
            best = best.max(psnr(&pred, &tgt, 1.0)?);
        }
        Ok(best)
    }
}

/// Copies the generator weights (the first `n_gen` entries) into their own store.
fn extract_generator(store: &ParamStore, n_gen: usize, task: &SynthesisTask, net: &NetConfig) -> Result<Synthesizer> {
    let mut own = ParamStore::new(0);
    let fcn = Synthesizer::build(&mut own, task, net)?;
    for id in store.ids().take(n_gen) {
        own.set(store.name(id), store.get(id).clone())?;
    }
    let mut s = Synthesizer::from_parts(task, net, own, fcn);
    octnet::checkpoint::quantize_like_archive(s.store_mut());
    Ok(s)
}

/// Alternating updates: each step takes a generator step against the current
/// discriminator, then a discriminator step on the resulting fake.
pub fn train_synthesizer(
    task: &SynthesisTask,
    train: &[PreparedCase],
    holdout: &[PreparedCase],
    cfg: &GanTrainConfig,
) -> Result<GanTraining> {
    task.validate()?;
    cfg.validate()?;
    let pairs = paired_slices(train, task);
    if pairs.is_empty() {
        return Err(data_err(format!("no training case provides {}", task.name())));
    }
    let mut store = ParamStore::new(cfg.seed);
    let gen = Synthesizer::build(&mut store, task, &cfg.net)?;
    let n_gen = store.len();
    let disc = Discriminator::new(&mut store, DISC_PREFIX, task.sources.len() + 1, &cfg.discriminator)?;
    let is_gen = |id: ParamId| id.index() < n_gen;
    let mut opt_g = cfg.optim.adam(cfg.lr_g)?;
    let mut opt_d = cfg.optim.adam(cfg.lr_d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6a4);
    let hold = Holdout::new(holdout, task, cfg.seed)?;
    let eval_psnr = |store: &ParamStore| -> Result<Option<f64>> {
        hold.as_ref()
            .map(|h| {
                h.psnr_with(|s, n| {
                    let mut g = Graph::new(store, Mode::Eval);
                    let out = generator_graph(&mut g, &gen, task, s, n)?;
                    Ok(g.value(out).clone())
                })
            })
            .transpose()
    };
    let mut psnr_curve = Vec::new();
    if let Some(p) = eval_psnr(&store)? {
        psnr_curve.push((0, p));
    }
    let mut losses = Vec::with_capacity(cfg.steps);
    let target_mod: [Modality; 1] = [task.target];
    for step in 1..=cfg.steps {
        let picks: Vec<(usize, usize)> = (0..cfg.batch).map(|_| pairs[rng.random_range(0..pairs.len())]).collect();
        let src = stack_slices(picks.iter().map(|&(c, z)| (&train[c], z)), &task.sources)?;
        let tgt = stack_slices(picks.iter().map(|&(c, z)| (&train[c], z)), &target_mod)?;
        let (b, _, h, w) = src.dims4();
        let noise = Tensor::randn(&[b, task.noise_channels, h, w], 1.0, &mut rng);

        let (g_loss, l1, fake, mut g_grads, updates) = {
            let mut g = Graph::new(&store, Mode::Train);
            let fake = generator_graph(&mut g, &gen, task, &src, &noise)?;
            let s = g.input(src.clone());
            let pair = g.concat_channels(&[s, fake]);
            let logits = disc.logits(&mut g, pair)?;
            let t = g.input(tgt.clone());
            let (loss, l1) = generator_loss_node(&mut g, &cfg.objective, logits, fake, t);
            let vals = (g.value(loss).data()[0], g.value(l1).data()[0], g.value(fake).clone());
            (vals.0, vals.1, vals.2, g.backward(loss), g.take_stat_updates())
        };
        if !g_loss.is_finite() {
            return Err(Error::Runtime(format!("generator loss became {g_loss} at step {step}")));
        }
        g_grads.retain_params(is_gen);
        opt_g.step(&mut store, &g_grads);
        octnet::optim::apply_stat_updates(&mut store, &updates, octnet::layers::BN_MOMENTUM);

        let (d_loss, mut d_grads) = {
            let mut g = Graph::new(&store, Mode::Train);
            let real = g.input(Tensor::cat_channels(&[&src, &tgt])?);
            let fake = g.input(Tensor::cat_channels(&[&src, &fake])?);
            let lr = disc.logits(&mut g, real)?;
            let lf = disc.logits(&mut g, fake)?;
            let loss = discriminator_loss_node(&mut g, lr, lf);
            (g.value(loss).data()[0], g.backward(loss))
        };
        if !d_loss.is_finite() {
            return Err(Error::Runtime(format!("discriminator loss became {d_loss} at step {step}")));
        }
        d_grads.retain_params(|id| !is_gen(id));
        opt_d.step(&mut store, &d_grads);

        losses.push(StepLosses { step, g_loss, d_loss, l1 });
        if step % cfg.psnr_every == 0 || step == cfg.steps {
            if let Some(p) = eval_psnr(&store)? {
                psnr_curve.push((step, p));
            }
        }
    }
    let synthesizer = extract_generator(&store, n_gen, task, &cfg.net)?;
    let baseline_psnr = hold.as_ref().map(Holdout::baseline_psnr).transpose()?;
    Ok(GanTraining {
        synthesizer,
        discriminator: TrainedDiscriminator { store, net: disc },
        losses,
        psnr_curve,
        baseline_psnr,
    })
}
