//! Minimal differentiable-computation kernel: tensors, a reverse-mode tape,
//! convolutions, gated blocks, attention, losses and Adam.

mod adam;
mod gradcheck;
pub mod kernels;
mod layers;
pub mod loss;
mod param;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_report, GradCheckReport};
pub use layers::{highway_block, scaled_dot_attention, Conv1dLayer, ConvTranspose1dLayer, HighwayLayer};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite values produced by {0}")]
    NonFinite(String),
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("duplicate parameter name {0}")]
    DuplicateParam(String),
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("id {id} out of range for vocabulary of {vocab}")]
    IdOutOfRange { id: usize, vocab: usize },
}
