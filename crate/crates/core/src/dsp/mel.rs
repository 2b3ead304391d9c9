//! Mel filterbank and normalised log-spectral features.

use super::config::DspConfig;
use super::stft::StftPlan;
use super::wav::Waveform;
use super::DspError;
use crate::nnet::Tensor;
use crate::real::Real;

/// Magnitude floor applied before log compression.
pub const LOG_FLOOR: f64 = 1e-5;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with unit peak, `[n_mels, n_fft/2+1]`.
///
/// Filter `i` rises from edge `i` to edge `i + 1` and falls to edge `i + 2`
/// of `n_mels + 2` points equally spaced in mel between `fmin` and `fmax`.
pub fn mel_filterbank<T: Real>(cfg: &DspConfig) -> Result<Tensor<T>, DspError> {
    cfg.validate()?;
    let bins = cfg.n_bins();
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * cfg.sample_rate as f64 / cfg.n_fft as f64;
    let mut fb = Tensor::zeros(&[cfg.n_mels, bins]);
    for m in 0..cfg.n_mels {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut row_sum = 0.0;
        for k in 0..bins {
            let f = bin_hz(k);
            let w = ((f - left) / (centre - left)).min((right - f) / (right - centre)).max(0.0);
            row_sum += w;
            fb.set(m, k, T::lit(w));
        }
        if row_sum <= 0.0 {
            return Err(DspError::EmptyFilter { index: m, n_mels: cfg.n_mels });
        }
    }
    Ok(fb)
}

/// Normalised log-magnitude spectrogram `[frames, n_fft/2+1]`, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MagSpectrogram<T: Real> {
    pub frames: Tensor<T>,
    /// `true` for normalised log magnitudes, `false` for linear magnitudes.
    pub normalized: bool,
}

/// Normalised log-mel spectrogram `[frames, n_mels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram<T: Real> {
    pub frames: Tensor<T>,
    /// Fingerprint of the [`DspConfig`] that produced it.
    pub fingerprint: String,
    /// Time decimation applied (1 for full frame rate).
    pub reduction: usize,
}

impl<T: Real> MelSpectrogram<T> {
    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }
}

/// `20 log10(max(floor, v))` mapped through `(db - ref_db + max_db) / max_db`
/// and clipped to `[0, 1]`.
pub fn normalize_db<T: Real>(v: T, cfg: &DspConfig) -> T {
    let db = 20.0 * v.to_f64_lossy().max(LOG_FLOOR).log10();
    T::lit(((db - cfg.ref_db + cfg.max_db) / cfg.max_db).clamp(0.0, 1.0))
}

/// Inverse of [`normalize_db`] (clipped values map to the clip boundary).
pub fn denormalize_db<T: Real>(v: T, cfg: &DspConfig) -> T {
    let db = v.to_f64_lossy().clamp(0.0, 1.0) * cfg.max_db - cfg.max_db + cfg.ref_db;
    T::lit(10f64.powf(db / 20.0))
}

pub fn preemphasize<T: Real>(x: &[T], coef: f64) -> Vec<T> {
    let c = T::lit(coef);
    let mut out = Vec::with_capacity(x.len());
    let mut prev = T::zero();
    for &v in x {
        out.push(v - c * prev);
        prev = v;
    }
    out
}

/// Inverse of [`preemphasize`]: `y[n] = x[n] + coef * y[n-1]`.
pub fn deemphasize<T: Real>(x: &[T], coef: f64) -> Vec<T> {
    let c = T::lit(coef);
    let mut out = Vec::with_capacity(x.len());
    let mut prev = T::zero();
    for &v in x {
        prev = v + c * prev;
        out.push(prev);
    }
    out
}

/// Reusable mel analysis for one configuration.
pub struct MelAnalyzer<T: Real> {
    cfg: DspConfig,
    plan: StftPlan<T>,
    filterbank: Tensor<T>,
}

impl<T: Real> MelAnalyzer<T> {
    pub fn new(cfg: &DspConfig) -> Result<Self, DspError> {
        Ok(Self { cfg: cfg.clone(), plan: StftPlan::new(cfg)?, filterbank: mel_filterbank(cfg)? })
    }

    pub fn config(&self) -> &DspConfig {
        &self.cfg
    }

    /// Linear magnitudes `[frames, bins]` after pre-emphasis.
    pub fn linear_magnitude(&self, w: &Waveform<T>) -> Result<Tensor<T>, DspError> {
        let emphasized = preemphasize(&w.samples, self.cfg.preemphasis);
        Ok(self.plan.stft(&emphasized)?.magnitude())
    }

    /// Returns `(mel, mag)`; the mel branch keeps every `reduction`-th frame.
    pub fn analyze(&self, w: &Waveform<T>, reduction: usize) -> Result<(MelSpectrogram<T>, MagSpectrogram<T>), DspError> {
        if reduction == 0 {
            return Err(DspError::InvalidConfig("reduction must be at least 1".into()));
        }
        let mag = self.linear_magnitude(w)?;
        let (frames, bins) = (mag.rows(), mag.cols());
        let n_mels = self.cfg.n_mels;
        // mel[t, m] = sum_k mag[t, k] * fb[m, k]
        let mut mel = vec![T::zero(); frames * n_mels];
        T::gemm(
            frames,
            bins,
            n_mels,
            T::one(),
            mag.data(),
            (bins as isize, 1),
            self.filterbank.data(),
            (1, bins as isize),
            T::zero(),
            &mut mel,
            (n_mels as isize, 1),
        );
        let kept = frames.div_ceil(reduction);
        let mel = Tensor::from_fn2(kept, n_mels, |t, m| normalize_db(mel[t * reduction * n_mels + m], &self.cfg));
        let mag = mag.map(|v| normalize_db(v, &self.cfg));
        Ok((
            MelSpectrogram { frames: mel, fingerprint: self.cfg.fingerprint(), reduction },
            MagSpectrogram { frames: mag, normalized: true },
        ))
    }
}

/// Features for acoustic-model training: mel decimated by the configured
/// reduction factor, and the full-rate normalised magnitude.
pub fn mel_spectrogram<T: Real>(w: &Waveform<T>, cfg: &DspConfig) -> Result<(MelSpectrogram<T>, MagSpectrogram<T>), DspError> {
    MelAnalyzer::new(cfg)?.analyze(w, cfg.reduction_factor)
}
