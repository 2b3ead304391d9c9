use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::correct::corrector_mel;
use super::generator::{Generator, GeneratorHparams};
use super::loss::multiscale_stft_loss_var;
use super::VocoderError;
use crate::dsp::{DspConfig, Waveform};
use crate::nnet::{adam_step, AdamConfig, AdamState, Tape, Tensor};
use crate::real::Real;

/// A full-rate mel spectrogram and the waveform it was analysed from,
/// zero-padded to `hop * frames` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorPair<T: Real> {
    pub mel: Tensor<T>,
    pub wave: Vec<T>,
}

pub fn corrector_pair<T: Real>(w: &Waveform<T>, dsp: &DspConfig) -> Result<CorrectorPair<T>, VocoderError> {
    let mel = corrector_mel(w, dsp)?;
    let mut wave = w.samples.clone();
    wave.resize(mel.cols() * dsp.hop_length, T::zero());
    Ok(CorrectorPair { mel, wave })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyOptions {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ToyOptions {
    fn default() -> Self {
        ToyOptions { steps: 2000, lr: 1e-3, seed: 0 }
    }
}

pub struct ToyTrainOutput<T: Real> {
    pub generator: Generator<T>,
    pub adam: AdamState<T>,
    /// Mean multiscale loss over the pairs before each step, plus the final value.
    pub losses: Vec<f64>,
}

impl<T: Real> ToyTrainOutput<T> {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least the initial loss")
    }
}

fn pair_loss<T: Real>(g: &Generator<T>, p: &CorrectorPair<T>, grads: bool) -> Result<(f64, Vec<Option<Tensor<T>>>), VocoderError> {
    let mut tape = Tape::new();
    let mel = tape.constant(p.mel.clone())?;
    let y = g.forward(&mut tape, mel)?;
    let loss = multiscale_stft_loss_var(&mut tape, y, &p.wave)?;
    let value = tape.scalar(loss).to_f64_lossy();
    let g = if grads { tape.backward(loss)?.for_params(g.store.len()) } else { Vec::new() };
    Ok((value, g))
}

/// Reconstruction-only generator training with the multiscale STFT loss.
/// Deterministic for a fixed seed; `steps = 0` returns the initial model.
pub fn train_corrector_toy<T: Real>(
    pairs: &[CorrectorPair<T>],
    hparams: GeneratorHparams,
    opts: &ToyOptions,
) -> Result<ToyTrainOutput<T>, VocoderError> {
    if pairs.is_empty() {
        return Err(VocoderError::InvalidInput("no training pairs".into()));
    }
    let mut generator = Generator::new(hparams, &mut ChaCha8Rng::seed_from_u64(opts.seed))?;
    let mut adam = AdamState::new(&generator.store, AdamConfig { lr: opts.lr, ..Default::default() });
    let mut losses = Vec::with_capacity(opts.steps + 1);
    let inv = T::one() / T::from_usize_lossy(pairs.len());
    for _ in 0..opts.steps {
        let mut acc: Vec<Option<Tensor<T>>> = vec![None; generator.store.len()];
        let mut mean = 0.0;
        for p in pairs {
            let (value, grads) = pair_loss(&generator, p, true)?;
            mean += value / pairs.len() as f64;
            for (slot, g) in acc.iter_mut().zip(grads) {
                let Some(mut g) = g else { continue };
                g.data_mut().iter_mut().for_each(|v| *v *= inv);
                match slot {
                    Some(a) => a.add_assign(&g),
                    None => *slot = Some(g),
                }
            }
        }
        if !mean.is_finite() {
            return Err(VocoderError::Diverged(losses.len()));
        }
        losses.push(mean);
        adam_step(&mut generator.store, &acc, &mut adam)?;
    }
    let mut mean = 0.0;
    for p in pairs {
        mean += pair_loss(&generator, p, false)?.0 / pairs.len() as f64;
    }
    if !mean.is_finite() {
        return Err(VocoderError::Diverged(losses.len()));
    }
    losses.push(mean);
    Ok(ToyTrainOutput { generator, adam, losses })
}
