//! Convolutional sequence-to-sequence acoustic model and spectrogram
//! super-resolution network.
//!
//! Tensors are channels-first: mel spectrograms are `[n_mels, T]`, linear
//! magnitudes `[n_bins, T * reduction]`, attention `[N, T]`.

mod attention;
mod hparams;
mod model;
mod ssrn;
mod synth;

pub use attention::{attention_diagonality, AttentionMatrix};
pub use hparams::{LossWeights, SsrnHparams, Text2MelHparams};
pub use model::{shift_right, T2mLoss, T2mVars, Text2Mel};
pub use ssrn::{Ssrn, SsrnLoss};
pub use synth::{synthesize_mel, SynthesisOutput, StopReason, STOP_RULE};

use crate::nnet::NnetError;

#[derive(Debug, thiserror::Error)]
pub enum Text2MelError {
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error("{what} fingerprint mismatch: model has {model}, input has {input}")]
    FingerprintMismatch { what: &'static str, model: String, input: String },
    #[error("expected {expected} channels, got {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHparams(String),
}
