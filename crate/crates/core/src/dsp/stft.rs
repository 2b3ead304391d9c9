//! Short-time Fourier transform and its least-squares inverse.
//!
//! Without centering, frame `f` analyses samples
//! `f * hop .. f * hop + win_length` and there are
//! `1 + (len - win_length) / hop` frames. With centering the signal is first
//! reflect-padded by `n_fft / 2` on both sides, giving `1 + len / hop` frames
//! whose centres sit on multiples of `hop`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::config::DspConfig;
use super::wav::Waveform;
use super::DspError;
use crate::nnet::Tensor;
use crate::real::Real;

/// One-sided complex spectrogram, row-major `[frames, n_fft/2+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram<T: Real> {
    pub n_frames: usize,
    pub n_bins: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> ComplexSpectrogram<T> {
    pub fn magnitude(&self) -> Tensor<T> {
        Tensor::from_vec(&[self.n_frames, self.n_bins], self.data.iter().map(|c| c.norm()).collect())
            .expect("spectrogram shape")
    }

    pub fn phase(&self) -> Tensor<T> {
        Tensor::from_vec(&[self.n_frames, self.n_bins], self.data.iter().map(|c| c.arg()).collect())
            .expect("spectrogram shape")
    }

    /// Combines magnitude and phase matrices of equal shape.
    pub fn from_polar(magnitude: &Tensor<T>, phase: &Tensor<T>) -> Result<Self, DspError> {
        if magnitude.shape() != phase.shape() {
            return Err(DspError::Dimension(format!(
                "magnitude {:?} vs phase {:?}",
                magnitude.shape(),
                phase.shape()
            )));
        }
        let (n_frames, n_bins) = magnitude.dims2().map_err(|e| DspError::Dimension(e.to_string()))?;
        let data = magnitude.data().iter().zip(phase.data()).map(|(&m, &p)| Complex::from_polar(m, p)).collect();
        Ok(Self { n_frames, n_bins, data })
    }
}

/// Reusable window and FFT plans for one configuration.
pub struct StftPlan<T: Real> {
    n_fft: usize,
    hop: usize,
    win_length: usize,
    center: bool,
    /// Hann window of `win_length`, zero padded and centred in `n_fft`.
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> StftPlan<T> {
    pub fn new(cfg: &DspConfig) -> Result<Self, DspError> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        let offset = (cfg.n_fft - cfg.win_length) / 2;
        let hann = crate::nnet::kernels::hann::<T>(cfg.win_length);
        let mut window = vec![T::zero(); cfg.n_fft];
        window[offset..offset + cfg.win_length].copy_from_slice(&hann);
        Ok(Self {
            n_fft: cfg.n_fft,
            hop: cfg.hop_length,
            win_length: cfg.win_length,
            center: cfg.center,
            window,
            forward: planner.plan_fft_forward(cfg.n_fft),
            inverse: planner.plan_fft_inverse(cfg.n_fft),
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    /// Offset from the start of the (padded) signal to FFT buffer index 0 of frame 0.
    fn buffer_origin(&self) -> isize {
        -(((self.n_fft - self.win_length) / 2) as isize)
    }

    pub fn frame_count(&self, len: usize) -> usize {
        if self.center {
            1 + len / self.hop
        } else if len < self.win_length {
            0
        } else {
            1 + (len - self.win_length) / self.hop
        }
    }

    fn padded(&self, x: &[T]) -> Result<Vec<T>, DspError> {
        if !self.center {
            return Ok(x.to_vec());
        }
        let pad = self.n_fft / 2;
        if x.len() <= pad {
            return Err(DspError::TooShort { len: x.len(), needed: pad + 1 });
        }
        let mut out = Vec::with_capacity(x.len() + 2 * pad);
        out.extend((1..=pad).rev().map(|i| x[i]));
        out.extend_from_slice(x);
        out.extend((0..pad).map(|i| x[x.len() - 2 - i]));
        Ok(out)
    }

    pub fn stft(&self, x: &[T]) -> Result<ComplexSpectrogram<T>, DspError> {
        let needed = if self.center { self.n_fft / 2 + 1 } else { self.win_length };
        if x.len() < needed {
            return Err(DspError::TooShort { len: x.len(), needed });
        }
        let signal = self.padded(x)?;
        // Centred frames are laid out on the padded signal as full n_fft windows.
        let (frames, origin) = if self.center {
            (1 + x.len() / self.hop, 0isize)
        } else {
            (self.frame_count(x.len()), self.buffer_origin())
        };
        let bins = self.n_bins();
        let mut data = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n_fft];
        for f in 0..frames {
            let start = (f * self.hop) as isize + origin;
            for (j, b) in buf.iter_mut().enumerate() {
                let idx = start + j as isize;
                let v = if idx >= 0 && (idx as usize) < signal.len() { signal[idx as usize] } else { T::zero() };
                *b = Complex::new(v * self.window[j], T::zero());
            }
            self.forward.process(&mut buf);
            data.extend_from_slice(&buf[..bins]);
        }
        Ok(ComplexSpectrogram { n_frames: frames, n_bins: bins, data })
    }

    /// Natural output length of [`StftPlan::istft`] for `frames` frames.
    pub fn istft_len(&self, frames: usize) -> usize {
        if frames == 0 {
            return 0;
        }
        if self.center {
            (frames - 1) * self.hop
        } else {
            (frames - 1) * self.hop + self.win_length
        }
    }

    /// Weighted overlap-add with window-square normalisation; the least-squares
    /// signal whose STFT is closest to `spec`.
    pub fn istft(&self, spec: &ComplexSpectrogram<T>, length: Option<usize>) -> Result<Vec<T>, DspError> {
        if spec.n_bins != self.n_bins() || spec.data.len() != spec.n_frames * spec.n_bins {
            return Err(DspError::Dimension(format!(
                "spectrogram has {} bins x {} frames ({} values), configuration expects {} bins",
                spec.n_bins,
                spec.n_frames,
                spec.data.len(),
                self.n_bins()
            )));
        }
        let frames = spec.n_frames;
        let (origin, padded_len) = if self.center {
            (0isize, (frames - 1) * self.hop + self.n_fft)
        } else {
            (self.buffer_origin(), self.istft_len(frames))
        };
        let mut acc = vec![T::zero(); padded_len];
        let mut wsum = vec![T::zero(); padded_len];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n_fft];
        let scale = T::one() / T::from_usize_lossy(self.n_fft);
        let bins = self.n_bins();
        for f in 0..frames {
            let row = &spec.data[f * bins..(f + 1) * bins];
            buf[..bins].copy_from_slice(row);
            for k in 1..self.n_fft - bins + 1 {
                buf[self.n_fft - k] = row[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = (f * self.hop) as isize + origin;
            for (j, b) in buf.iter().enumerate() {
                let idx = start + j as isize;
                if idx >= 0 && (idx as usize) < padded_len {
                    let w = self.window[j];
                    acc[idx as usize] += b.re * scale * w;
                    wsum[idx as usize] += w * w;
                }
            }
        }
        let tiny = T::epsilon() * T::epsilon();
        let mut out: Vec<T> =
            acc.iter().zip(&wsum).map(|(&a, &w)| if w > tiny { a / w } else { T::zero() }).collect();
        if self.center {
            let pad = self.n_fft / 2;
            out = out[pad..out.len() - pad].to_vec();
        }
        if let Some(len) = length {
            out.resize(len, T::zero());
        }
        Ok(out)
    }
}

/// STFT of a waveform under `cfg`.
pub fn stft<T: Real>(w: &Waveform<T>, cfg: &DspConfig) -> Result<ComplexSpectrogram<T>, DspError> {
    StftPlan::new(cfg)?.stft(&w.samples)
}

/// Inverse STFT. `length` trims or zero-pads the result.
pub fn istft<T: Real>(spec: &ComplexSpectrogram<T>, cfg: &DspConfig, length: Option<usize>) -> Result<Waveform<T>, DspError> {
    let samples = StftPlan::new(cfg)?.istft(spec, length)?;
    Waveform::new(samples, cfg.sample_rate)
}
