//! A compact, deterministic, `f64` reverse-mode autodiff engine and the
//! network pieces built on it: octave convolutions, concurrent
//! spatial/channel squeeze-and-excitation with a skip path, UNet-style
//! encoder/decoder blocks, and a fully convolutional network that wires them
//! together.
//!
//! Everything runs on the CPU, single threaded, so a fixed seed reproduces a
//! training run bit for bit.

pub mod blocks;
pub mod checkpoint;
pub mod error;
pub mod fcn;
pub mod graph;
mod kernels;
pub mod layers;
pub mod octconv;
pub mod optim;
pub mod params;
pub mod scse;
pub mod tensor;

pub use blocks::{BlockConfig, DecoderBlock, EncoderBlock};
pub use error::{NnError, Result};
pub use fcn::{Fcn, FcnConfig};
pub use graph::{Gradients, Graph, Mode, NodeId};
pub use octconv::{OctConv, OctConvConfig, OctFeature};
pub use optim::{Adam, AdamConfig};
pub use params::{ParamId, ParamStore};
pub use scse::{Combine, Scse, SkipScse};
pub use tensor::Tensor;
