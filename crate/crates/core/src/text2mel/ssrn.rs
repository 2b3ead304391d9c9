use rand::Rng;

use super::hparams::SsrnHparams;
use super::Text2MelError;
use crate::nnet::{Conv1dLayer, ConvTranspose1dLayer, HighwayLayer, ParamStore, Tape, Tensor, Var};
use crate::real::Real;

type Result<T> = std::result::Result<T, Text2MelError>;

#[derive(Clone, Copy, Debug)]
pub struct SsrnLoss {
    pub total: Var,
    pub l1: Var,
    pub binary_divergence: Var,
    pub magnitude: Var,
}

/// Maps a coarse mel spectrogram `[n_mels, T]` to a full-rate linear
/// magnitude `[n_bins, T * reduction]`.
#[derive(Clone, Debug)]
pub struct Ssrn<T: Real> {
    pub hparams: SsrnHparams,
    pub store: ParamStore<T>,
    pre: Conv1dLayer,
    pre_highways: Vec<HighwayLayer>,
    stages: Vec<(ConvTranspose1dLayer, HighwayLayer)>,
    post: Conv1dLayer,
    out: Conv1dLayer,
}

impl<T: Real> Ssrn<T> {
    pub fn new<R: Rng + ?Sized>(hparams: SsrnHparams, rng: &mut R) -> Result<Self> {
        hparams.validate()?;
        let (c, k) = (hparams.channels, hparams.kernel);
        let mut store = ParamStore::new();
        let s = &mut store;
        let pre = Conv1dLayer::new(s, "ssrn.pre", hparams.n_mels, c, 1, 1, false, rng)?;
        let pre_highways = vec![
            HighwayLayer::new(s, "ssrn.hw0", c, k, 1, false, rng)?,
            HighwayLayer::new(s, "ssrn.hw1", c, k, 3, false, rng)?,
        ];
        let stages = (0..hparams.upsampling_stages())
            .map(|i| {
                Ok((
                    ConvTranspose1dLayer::new(s, &format!("ssrn.up{i}"), c, c, 2, 2, rng)?,
                    HighwayLayer::new(s, &format!("ssrn.up{i}.hw"), c, k, 1, false, rng)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let post = Conv1dLayer::new(s, "ssrn.post", c, c, 1, 1, false, rng)?;
        let out = Conv1dLayer::new(s, "ssrn.out", c, hparams.n_bins, 1, 1, false, rng)?;
        Ok(Ssrn { hparams, store, pre, pre_highways, stages, post, out })
    }

    /// Returns the output logits; magnitudes are their sigmoid.
    pub fn forward_logits(&self, tape: &mut Tape<T>, mel: Var) -> Result<Var> {
        let (c, t) = tape.value(mel).dims2()?;
        if c != self.hparams.n_mels {
            return Err(Text2MelError::ChannelMismatch { expected: self.hparams.n_mels, found: c });
        }
        if t == 0 {
            return Err(Text2MelError::InvalidInput("mel spectrogram has no frames".into()));
        }
        let mut x = self.pre.forward(tape, &self.store, mel)?;
        for hw in &self.pre_highways {
            x = hw.forward(tape, &self.store, x)?;
        }
        for (up, hw) in &self.stages {
            x = up.forward(tape, &self.store, x)?;
            x = hw.forward(tape, &self.store, x)?;
        }
        let x = self.post.forward(tape, &self.store, x)?;
        let x = tape.relu(x)?;
        Ok(self.out.forward(tape, &self.store, x)?)
    }

    /// Magnitudes in `(0, 1)`, `[n_bins, T * reduction]`.
    pub fn infer(&self, mel: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let x = tape.constant(mel.clone())?;
        let logits = self.forward_logits(&mut tape, x)?;
        let mag = tape.sigmoid(logits)?;
        Ok(tape.value(mag).clone())
    }

    /// L1 plus binary divergence against `target: [n_bins, T * reduction]`.
    pub fn loss(&self, tape: &mut Tape<T>, mel: &Tensor<T>, target: &Tensor<T>) -> Result<SsrnLoss> {
        let x = tape.constant(mel.clone())?;
        let logits = self.forward_logits(tape, x)?;
        if tape.value(logits).shape() != target.shape() {
            return Err(Text2MelError::InvalidInput(format!(
                "SSRN target {:?} does not match output {:?}",
                target.shape(),
                tape.value(logits).shape()
            )));
        }
        let magnitude = tape.sigmoid(logits)?;
        let l1 = tape.l1_loss(magnitude, target.clone())?;
        let bd = tape.binary_divergence_logits(logits, target.clone())?;
        let total = tape.add(l1, bd)?;
        Ok(SsrnLoss { total, l1, binary_divergence: bd, magnitude })
    }

    pub fn all_finite(&self) -> bool {
        self.store.iter().all(|(_, p)| p.value.all_finite())
    }
}
