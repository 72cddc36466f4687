//! Single-file weight archives: a JSON architecture descriptor plus named
//! little-endian `f32` arrays, stored in the safetensors container.

use std::collections::HashMap;
use std::path::Path;

use safetensors::tensor::TensorView;
use safetensors::{Dtype, SafeTensors};
use serde_json::Value;

use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

const DESCRIPTOR_KEY: &str = "descriptor";

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub descriptor: Value,
    pub tensors: Vec<(String, Tensor)>,
}

fn st_err(e: safetensors::SafeTensorError) -> NnError {
    NnError::Checkpoint(e.to_string())
}

pub fn to_bytes(descriptor: &Value, store: &ParamStore) -> Result<Vec<u8>> {
    let buffers: Vec<(String, Vec<usize>, Vec<u8>)> = store
        .iter()
        .map(|(name, t)| {
            let bytes = t
                .data()
                .iter()
                .flat_map(|&v| (v as f32).to_le_bytes())
                .collect();
            (name.to_string(), t.shape().to_vec(), bytes)
        })
        .collect();
    let views = buffers
        .iter()
        .map(|(name, shape, bytes)| {
            TensorView::new(Dtype::F32, shape.clone(), bytes)
                .map(|v| (name.clone(), v))
                .map_err(st_err)
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = HashMap::from([(DESCRIPTOR_KEY.to_string(), serde_json::to_string(descriptor)?)]);
    safetensors::serialize(views, Some(meta)).map_err(st_err)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let (_, meta) = SafeTensors::read_metadata(bytes).map_err(st_err)?;
    let descriptor = meta
        .metadata()
        .as_ref()
        .and_then(|m| m.get(DESCRIPTOR_KEY))
        .ok_or_else(|| NnError::Checkpoint("archive has no architecture descriptor".into()))?;
    let descriptor: Value = serde_json::from_str(descriptor)?;
    let st = SafeTensors::deserialize(bytes).map_err(st_err)?;
    let mut tensors = Vec::new();
    for (name, view) in st.tensors() {
        if view.dtype() != Dtype::F32 {
            return Err(NnError::Checkpoint(format!("tensor `{name}` is not f32")));
        }
        let data = view
            .data()
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        tensors.push((name, Tensor::from_vec(view.shape(), data)?));
    }
    tensors.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(Checkpoint { descriptor, tensors })
}

pub fn save(path: impl AsRef<Path>, descriptor: &Value, store: &ParamStore) -> Result<()> {
    std::fs::write(path, to_bytes(descriptor, store)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    from_bytes(&std::fs::read(path)?)
}

impl Checkpoint {
    /// Copies every stored tensor into `store`; the store must hold exactly
    /// the same names and shapes.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<()> {
        if self.tensors.len() != store.len() {
            return Err(NnError::Checkpoint(format!(
                "archive holds {} tensors, network has {}",
                self.tensors.len(),
                store.len()
            )));
        }
        for (name, t) in &self.tensors {
            store.set(name, t.clone())?;
        }
        Ok(())
    }
}

/// Rounds every stored value through `f32`, matching what an archive holds.
pub fn quantize_like_archive(store: &mut ParamStore) {
    for id in store.ids().collect::<Vec<_>>() {
        for v in store.get_mut(id).data_mut() {
            *v = f64::from(*v as f32);
        }
    }
}
