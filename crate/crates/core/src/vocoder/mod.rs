//! Waveform generation: Griffin-Lim vocoding and the neural waveform
//! corrector (mel analysis followed by generator resynthesis).

mod correct;
mod generator;
mod gl;
mod loss;
mod toy;

pub use correct::{correct_waveform, corrector_dsp, corrector_mel, CorrectionConfig};
pub use generator::{melgan_generate, residual_block, Generator, GeneratorHparams};
pub use gl::{gl_vocode, GlConfig, GlOutput};
pub use loss::{multiscale_stft_loss, multiscale_stft_loss_var, LOG_MAG_FLOOR, STFT_SIZES};
pub use toy::{corrector_pair, train_corrector_toy, CorrectorPair, ToyOptions, ToyTrainOutput};

use rand::SeedableRng;

use crate::dsp::{DspConfig, DspError};
use crate::nnet::{AdamState, NnetError};
use crate::train::{Checkpoint, CheckpointError, ModelKind, ProvenanceEntry};

#[derive(Debug, thiserror::Error)]
pub enum VocoderError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("expected {expected} mel channels, got {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("corrector training diverged at step {0}")]
    Diverged(usize),
}

pub fn generator_checkpoint(
    g: &Generator<f32>,
    adam: Option<&AdamState<f32>>,
    step: u64,
    provenance: Vec<ProvenanceEntry>,
) -> Checkpoint {
    Checkpoint::from_store(
        ModelKind::Generator,
        &g.store,
        adam,
        serde_json::to_value(&g.hparams).expect("hparams serialise"),
        None,
        g.hparams.dsp_fingerprint.clone(),
        step,
        provenance,
    )
}

/// Rebuilds a generator after checking kind, fingerprint and hop length.
pub fn load_generator(mut ck: Checkpoint, dsp: &DspConfig, allow_mismatch: bool) -> Result<Generator<f32>, VocoderError> {
    ck.expect_kind(ModelKind::Generator)?;
    ck.check_fingerprints(None, &dsp.fingerprint(), allow_mismatch)?;
    let hparams: GeneratorHparams = serde_json::from_value(ck.hparams.clone())
        .map_err(|e| VocoderError::InvalidConfig(format!("checkpoint hyperparameters: {e}")))?;
    hparams.validate(Some(dsp))?;
    let mut g = Generator::new(hparams, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0))?;
    ck.restore(&mut g.store, None)?;
    Ok(g)
}
