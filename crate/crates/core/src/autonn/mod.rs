//! Minimal reverse-mode autodiff, the toy networks and Adam.

pub mod adam;
pub mod checkpoint;
mod conv;
pub mod nets;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, Section};
pub use nets::{generator_features, DiscriminatorNet, GeneratorNet, NetConfig};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{flatten_grads, unflatten_grads, ParamSet, Tensor};

use crate::dsp::DspError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("parameter {0} has no gradient")]
    MissingGrad(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("duplicate parameter name {0}")]
    DuplicateName(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
