//! Missing-modality MRI synthesis, brain-tumor segmentation, radiomic feature
//! extraction and radiogenomic survival prediction on a shared octave-convolution
//! FCN.
//!
//! The runnable programs under `examples/` walk through each stage; the
//! `gbmrg` binary wires the stages into a JSON-configured pipeline.

pub mod case;
pub mod dataset;
pub mod error;
pub mod normalize;
pub mod phantom;
pub mod radiogenomics;
pub mod radiomics;
pub mod segmentation;
pub mod slices;
pub mod training;
pub mod synthesis;
pub mod pipeline;
pub mod volume;

pub use case::{CaseRecord, Modality, Provenance};
pub use error::{Error, Result};
pub use volume::{AnyVolume, Volume};
