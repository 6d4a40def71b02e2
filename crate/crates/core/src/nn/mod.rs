//! Dense tensors, a reverse-mode tape and the layers the classifier needs.

pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod weights;

pub use gradcheck::{grad_check, grad_check_chain, GradCheckConfig, GradReport};
pub use layers::{layer_forward, BandLayout, Conv2d, Layer, LayerSpec, Mode, NormLayer, RunningStats, Sequential};
pub use optim::Adam;
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{Band, GroupStats, Tape, Var};
pub use tensor::Tensor;
