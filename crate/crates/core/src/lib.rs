//! Laughter and speech synthesis from symbolic annotations.
//!
//! The crate is organised bottom-up:
//!
//! * [`dsp`]: WAV I/O, STFT, mel features and Griffin-Lim inversion.
//! * [`annotation`]: symbol alphabet, corpus manifests and a synthetic corpus generator.
//! * [`nnet`]: a small reverse-mode differentiation kernel.
//! * [`text2mel`]: the convolutional seq2seq acoustic model and the spectrogram super-resolution network.
//! * [`vocoder`]: Griffin-Lim vocoding and the neural waveform corrector.
//! * [`train`]: checkpoints, pretraining and fine-tuning.
//! * [`eval`]: listening-test statistics and objective spectral metrics.
//! * [`diagnostics`]: finite-difference checks of all differentiable ops.
//!
//! Numeric code is generic over [`Real`]; the aliases below fix the scalar
//! type for the common cases.

pub mod annotation;
pub mod diagnostics;
pub mod dsp;
pub mod eval;
pub mod nnet;
pub mod real;
pub mod text2mel;
pub mod train;
pub mod vocoder;

pub use real::Real;

pub type Tensor32 = nnet::Tensor<f32>;
pub type Tensor64 = nnet::Tensor<f64>;
