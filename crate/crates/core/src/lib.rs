//! Phase-aware time-series classification under nonstationary domain shift.
//!
//! Signal transforms, stationarity testing, augmentation, a small tape-based
//! autodiff engine, the two-branch classifier, divergence bounds and the
//! experiment harness.

pub mod augment;
pub mod dataset;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod signal;
pub mod stationarity;

pub use augment::{augment, AugmentKind, AugmentSpec};
pub use dataset::{merge, LabeledDataset, TimeSeries};
pub use divergence::{GaussianTrack, RenyiForm};
pub use error::{Error, ErrorKind, Result};
pub use model::{Architecture, PhaserConfig, PhaserModel};
pub use nn::Tensor;
