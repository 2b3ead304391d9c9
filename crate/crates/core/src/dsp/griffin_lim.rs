//! Iterative phase reconstruction from a linear magnitude spectrogram.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use super::config::DspConfig;
use super::stft::{ComplexSpectrogram, StftPlan};
use super::wav::Waveform;
use super::DspError;
use crate::nnet::Tensor;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PhaseInit {
    #[default]
    Zeros,
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GriffinLimOutput<T: Real> {
    pub waveform: Waveform<T>,
    /// `‖|STFT(x_t)| - m‖_F / ‖m‖_F` for the initial estimate and after each
    /// iteration (`n_iters + 1` entries). Zero when `m` is all zeros.
    pub convergence: Vec<T>,
}

fn spectral_convergence<T: Real>(spec: &ComplexSpectrogram<T>, target: &[T], target_norm: T) -> T {
    if target_norm == T::zero() {
        return T::zero();
    }
    let err: T = spec.data.iter().zip(target).map(|(c, &m)| (c.norm() - m) * (c.norm() - m)).sum();
    err.sqrt() / target_norm
}

/// Reconstructs a waveform whose STFT magnitude approximates `magnitude`
/// (`[frames, n_fft/2+1]`, linear domain).
pub fn griffin_lim<T: Real>(
    magnitude: &Tensor<T>,
    n_iters: usize,
    cfg: &DspConfig,
    init: PhaseInit,
) -> Result<GriffinLimOutput<T>, DspError> {
    if n_iters == 0 {
        return Err(DspError::InvalidConfig("griffin_lim needs at least one iteration".into()));
    }
    if !magnitude.all_finite() {
        return Err(DspError::NonFinite("griffin_lim magnitude".into()));
    }
    if magnitude.data().iter().any(|&v| v < T::zero()) {
        return Err(DspError::InvalidConfig("griffin_lim magnitude must be non-negative (linear domain)".into()));
    }
    let plan = StftPlan::new(cfg)?;
    let (frames, bins) = magnitude.dims2().map_err(|e| DspError::Dimension(e.to_string()))?;
    if bins != plan.n_bins() {
        return Err(DspError::Dimension(format!("{bins} bins, configuration expects {}", plan.n_bins())));
    }
    let target = magnitude.data();
    let target_norm = target.iter().map(|&v| v * v).sum::<T>().sqrt();
    let len = plan.istft_len(frames);

    let mut spec = ComplexSpectrogram { n_frames: frames, n_bins: bins, data: vec![Complex::new(T::zero(), T::zero()); frames * bins] };
    let mut rng = match init {
        PhaseInit::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        PhaseInit::Zeros => None,
    };
    for (c, &m) in spec.data.iter_mut().zip(target) {
        let phase = match rng.as_mut() {
            Some(r) => T::lit(r.random_range(-std::f64::consts::PI..std::f64::consts::PI)),
            None => T::zero(),
        };
        *c = Complex::from_polar(m, phase);
    }

    let mut x = plan.istft(&spec, Some(len))?;
    let mut convergence = Vec::with_capacity(n_iters + 1);
    for _ in 0..n_iters {
        let estimate = plan.stft(&x)?;
        convergence.push(spectral_convergence(&estimate, target, target_norm));
        for (c, (e, &m)) in spec.data.iter_mut().zip(estimate.data.iter().zip(target)) {
            let n = e.norm();
            *c = if n > T::zero() { e * (m / n) } else { Complex::new(m, T::zero()) };
        }
        x = plan.istft(&spec, Some(len))?;
    }
    convergence.push(spectral_convergence(&plan.stft(&x)?, target, target_norm));
    Ok(GriffinLimOutput { waveform: Waveform::new(x, cfg.sample_rate)?, convergence })
}
