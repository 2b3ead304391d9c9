use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::generator::Generator;
use super::VocoderError;
use crate::dsp::{DspConfig, MelAnalyzer, Waveform};
use crate::nnet::Tensor;
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionConfig {
    pub dsp: DspConfig,
    pub generator: Option<PathBuf>,
    /// Scale the corrected signal to the RMS of the input.
    pub loudness_match: bool,
    /// Inputs quieter than this RMS come back as silence.
    pub silence_rms: f64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig { dsp: DspConfig::default(), generator: None, loudness_match: true, silence_rms: 1e-4 }
    }
}

/// Analysis settings for the corrector: full frame rate with centred frames,
/// so `1 + len / hop` frames cover the whole signal.
pub fn corrector_dsp(dsp: &DspConfig) -> DspConfig {
    DspConfig { center: true, ..dsp.clone() }
}

/// Full-rate normalised mel `[n_mels, 1 + len / hop]`.
pub fn corrector_mel<T: Real>(w: &Waveform<T>, dsp: &DspConfig) -> Result<Tensor<T>, VocoderError> {
    let analyzer = MelAnalyzer::new(&corrector_dsp(dsp))?;
    let (mel, _) = analyzer.analyze(w, 1)?;
    Ok(mel.frames.transpose2())
}

/// Mel analysis followed by generator resynthesis. The output has the input
/// length; with `loudness_match` its RMS equals the input RMS (up to
/// clipping at full scale).
pub fn correct_waveform<T: Real>(w: &Waveform<T>, g: &Generator<T>, cc: &CorrectionConfig) -> Result<Waveform<T>, VocoderError> {
    g.hparams.validate(Some(&cc.dsp))?;
    if w.sample_rate != cc.dsp.sample_rate {
        return Err(VocoderError::InvalidInput(format!(
            "waveform at {} Hz, corrector expects {} Hz",
            w.sample_rate, cc.dsp.sample_rate
        )));
    }
    if w.is_empty() || w.rms().to_f64_lossy() < cc.silence_rms {
        return Ok(Waveform::silence(w.len(), w.sample_rate));
    }
    let mel = corrector_mel(w, &cc.dsp)?;
    let mut out = g.generate(&mel, w.sample_rate)?;
    out.samples.resize(w.len(), T::zero());
    if cc.loudness_match {
        let (target, got) = (w.rms(), out.rms());
        if got > T::zero() {
            let s = target / got;
            out.samples.iter_mut().for_each(|v| *v = (*v * s).max(-T::one()).min(T::one()));
        }
    }
    Ok(out)
}
