//! Synthesis tasks and the generator wrapper with its checkpoint format.

use std::path::Path;

use octnet::{checkpoint, Fcn, Graph, Mode, NodeId, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::case::Modality;
use crate::error::{data_err, Error, Result};
use crate::training::NetConfig;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisTask {
    pub sources: Vec<Modality>,
    pub target: Modality,
    #[serde(default = "one")]
    pub noise_channels: usize,
}

fn one() -> usize {
    1
}

impl SynthesisTask {
    pub fn new(sources: &[Modality], target: Modality) -> Result<Self> {
        let t = Self {
            sources: Modality::canonical(sources),
            target,
            noise_channels: 1,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Config("synthesis task needs at least one source".into()));
        }
        if self.sources.contains(&self.target) {
            return Err(Error::Config(format!("target {} is also a source", self.target)));
        }
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        self.sources.len() + self.noise_channels
    }

    pub fn name(&self) -> String {
        let src: Vec<&str> = self.sources.iter().map(|m| m.name()).collect();
        format!("{}->{}", src.join("+"), self.target.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesizerDescriptor {
    pub kind: String,
    pub task: SynthesisTask,
    pub net: NetConfig,
}

/// The trained generator of one task.
#[derive(Clone, Debug)]
pub struct Synthesizer {
    desc: SynthesizerDescriptor,
    store: ParamStore,
    net: Fcn,
}

impl Synthesizer {
    pub fn new(task: &SynthesisTask, net: &NetConfig, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new(seed);
        let fcn = Self::build(&mut store, task, net)?;
        Ok(Self {
            desc: SynthesizerDescriptor {
                kind: "synthesizer".into(),
                task: task.clone(),
                net: net.clone(),
            },
            store,
            net: fcn,
        })
    }

    pub(crate) fn build(store: &mut ParamStore, task: &SynthesisTask, net: &NetConfig) -> Result<Fcn> {
        task.validate()?;
        Ok(Fcn::new(store, net.fcn(task.in_channels(), 1))?)
    }

    pub(crate) fn from_parts(task: &SynthesisTask, net: &NetConfig, store: ParamStore, fcn: Fcn) -> Self {
        Self {
            desc: SynthesizerDescriptor {
                kind: "synthesizer".into(),
                task: task.clone(),
                net: net.clone(),
            },
            store,
            net: fcn,
        }
    }

    pub fn task(&self) -> &SynthesisTask {
        &self.desc.task
    }

    pub fn descriptor(&self) -> &SynthesizerDescriptor {
        &self.desc
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn net(&self) -> &Fcn {
        &self.net
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(checkpoint::to_bytes(&serde_json::to_value(&self.desc)?, &self.store)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ck = checkpoint::from_bytes(bytes)?;
        let desc: SynthesizerDescriptor = serde_json::from_value(ck.descriptor.clone())?;
        if desc.kind != "synthesizer" {
            return Err(data_err(format!("checkpoint holds a `{}`, not a synthesizer", desc.kind)));
        }
        let mut s = Self::new(&desc.task, &desc.net, 0)?;
        ck.restore_into(&mut s.store)?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Generator output `[B, 1, H, W]` for `sources` `[B, S, H, W]` and `noise` `[B, Z, H, W]`.
    pub fn forward(&self, sources: &Tensor, noise: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new(&self.store, Mode::Eval);
        let out = generator_graph(&mut g, &self.net, self.task(), sources, noise)?;
        Ok(g.value(out).clone())
    }

    /// Like [`forward`](Self::forward) with standard-normal noise drawn from `seed`.
    pub fn generate(&self, sources: &Tensor, seed: u64) -> Result<Tensor> {
        let (b, _, h, w) = sources.dims4();
        let noise = Tensor::randn(&[b, self.task().noise_channels, h, w], 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        self.forward(sources, &noise)
    }
}

pub(crate) fn generator_graph(g: &mut Graph, net: &Fcn, task: &SynthesisTask, sources: &Tensor, noise: &Tensor) -> Result<NodeId> {
    if sources.shape().len() != 4 || noise.shape().len() != 4 {
        return Err(data_err("generator inputs must be 4-D"));
    }
    let (b, c, h, w) = sources.dims4();
    if c != task.sources.len() {
        return Err(data_err(format!("task {} expects {} source channels, got {c}", task.name(), task.sources.len())));
    }
    if noise.shape() != [b, task.noise_channels, h, w] {
        return Err(data_err(format!("noise shape {:?} does not match sources {:?}", noise.shape(), sources.shape())));
    }
    let x = Tensor::cat_channels(&[sources, noise])?;
    let x = g.input(x);
    Ok(net.forward(g, x)?)
}
