//! Deterministic signal processing: audio I/O, STFT, mel features and
//! Griffin-Lim phase reconstruction.

mod config;
mod griffin_lim;
mod mel;
mod resample;
mod stft;
mod wav;

pub use config::DspConfig;
pub use griffin_lim::{griffin_lim, GriffinLimOutput, PhaseInit};
pub use mel::{
    deemphasize, denormalize_db, hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, normalize_db, preemphasize,
    MagSpectrogram, MelAnalyzer, MelSpectrogram, LOG_FLOOR,
};
pub use resample::resample;
pub use stft::{istft, stft, ComplexSpectrogram, StftPlan};
pub use wav::{load_wav, save_wav, wav_duration_secs, Waveform};

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Wav {
        path: String,
        #[source]
        source: hound::Error,
    },
    #[error("unsupported audio: {0}")]
    Unsupported(String),
    #[error("zero-length audio: {0}")]
    Empty(String),
    #[error("signal of {len} samples is shorter than one frame ({needed})")]
    TooShort { len: usize, needed: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("mel filter {index} of {n_mels} covers no FFT bin")]
    EmptyFilter { index: usize, n_mels: usize },
}
