//! Dataset files, synthetic domains, training, evaluation and experiments.

pub mod eval;
pub mod experiments;
pub mod io;
pub mod synth;
pub mod train;
