use serde::{Deserialize, Serialize};

use super::VocoderError;
use crate::dsp::{deemphasize, denormalize_db, griffin_lim, DspConfig, PhaseInit, Waveform};
use crate::nnet::Tensor;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlConfig {
    pub n_iters: usize,
    /// Sharpening exponent applied to linear magnitudes before inversion.
    pub gamma: f64,
    /// Output peak after normalisation.
    pub peak: f64,
    /// Below this raw peak the signal is treated as silence and left unscaled.
    pub silence_peak: f64,
    pub random_phase_seed: Option<u64>,
}

impl Default for GlConfig {
    fn default() -> Self {
        GlConfig { n_iters: 60, gamma: 1.3, peak: 0.95, silence_peak: 1e-3, random_phase_seed: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlOutput<T: Real> {
    pub waveform: Waveform<T>,
    /// Spectral convergence per iteration, see [`crate::dsp::GriffinLimOutput`].
    pub convergence: Vec<T>,
    /// Peak before normalisation.
    pub raw_peak: f64,
}

/// Griffin-Lim vocoding of a normalised magnitude spectrogram
/// `[frames, n_bins]`: denormalise, sharpen, invert, de-emphasise and
/// peak-normalise.
pub fn gl_vocode<T: Real>(mag_normalized: &Tensor<T>, dsp: &DspConfig, gl: &GlConfig) -> Result<GlOutput<T>, VocoderError> {
    if !(gl.gamma.is_finite() && gl.gamma > 0.0) {
        return Err(VocoderError::InvalidConfig(format!("gamma {} must be positive", gl.gamma)));
    }
    let gamma = T::lit(gl.gamma);
    let linear = mag_normalized.map(|v| denormalize_db(v, dsp).powf(gamma));
    let init = gl.random_phase_seed.map_or(PhaseInit::Zeros, |seed| PhaseInit::Random { seed });
    let out = griffin_lim(&linear, gl.n_iters, dsp, init)?;
    let mut samples = deemphasize(&out.waveform.samples, dsp.preemphasis);
    let raw_peak = samples.iter().fold(0.0f64, |m, v| m.max(v.to_f64_lossy().abs()));
    if raw_peak >= gl.silence_peak {
        let s = T::lit(gl.peak / raw_peak);
        samples.iter_mut().for_each(|v| *v *= s);
    }
    Ok(GlOutput { waveform: Waveform::new(samples, dsp.sample_rate)?, convergence: out.convergence, raw_peak })
}
