use rand::Rng;

use super::attention::AttentionMatrix;
use super::hparams::{LossWeights, Text2MelHparams};
use super::Text2MelError;
use crate::nnet::{scaled_dot_attention, Conv1dLayer, HighwayLayer, ParamId, ParamStore, Tape, Tensor, Var};
use crate::real::Real;

type Result<T> = std::result::Result<T, Text2MelError>;

const TEXT_DILATIONS: [usize; 6] = [1, 3, 9, 27, 1, 1];
const CAUSAL_DILATIONS: [usize; 4] = [1, 3, 9, 27];
const EOS_ID: usize = 1;

/// Teacher-forcing input: `[n_mels, T]` shifted right by one frame with a
/// zero first frame.
pub fn shift_right<T: Real>(mel: &Tensor<T>) -> Tensor<T> {
    let (c, t) = (mel.rows(), mel.cols());
    Tensor::from_fn2(c, t, |r, col| if col == 0 { T::zero() } else { mel.at(r, col - 1) })
}

/// Nodes of one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct T2mVars {
    pub logits: Var,
    pub mel: Var,
    pub attention: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct T2mLoss {
    pub total: Var,
    pub l1: Var,
    pub binary_divergence: Var,
    pub guided_attention: Var,
}

/// Text encoder, causal audio encoder, attention and causal audio decoder.
#[derive(Clone, Debug)]
pub struct Text2Mel<T: Real> {
    pub hparams: Text2MelHparams,
    pub store: ParamStore<T>,
    embedding: ParamId,
    text_pre: Conv1dLayer,
    text_highways: Vec<HighwayLayer>,
    audio_pre: Vec<Conv1dLayer>,
    audio_highways: Vec<HighwayLayer>,
    dec_pre: Conv1dLayer,
    dec_highways: Vec<HighwayLayer>,
    dec_post: Conv1dLayer,
    dec_out: Conv1dLayer,
}

impl<T: Real> Text2Mel<T> {
    pub fn new<R: Rng + ?Sized>(hparams: Text2MelHparams, rng: &mut R) -> Result<Self> {
        hparams.validate()?;
        let (e, d, k, m) = (hparams.embed_dim, hparams.hidden, hparams.kernel, hparams.n_mels);
        let mut store = ParamStore::new();
        let s = &mut store;
        let embedding = s.add("text.embedding", Tensor::uniform(&[hparams.vocab_size, e], 0.5, rng))?;
        let text_pre = Conv1dLayer::new(s, "text.pre", e, 2 * d, 1, 1, false, rng)?;
        let text_highways = TEXT_DILATIONS
            .iter()
            .enumerate()
            .map(|(i, &dil)| HighwayLayer::new(s, &format!("text.hw{i}"), 2 * d, k, dil, false, rng))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let audio_pre = vec![
            Conv1dLayer::new(s, "audio.pre0", m, d, 1, 1, true, rng)?,
            Conv1dLayer::new(s, "audio.pre1", d, d, 1, 1, true, rng)?,
        ];
        let audio_highways = CAUSAL_DILATIONS
            .iter()
            .enumerate()
            .map(|(i, &dil)| HighwayLayer::new(s, &format!("audio.hw{i}"), d, k, dil, true, rng))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let dec_pre = Conv1dLayer::new(s, "dec.pre", 2 * d, d, 1, 1, true, rng)?;
        let dec_highways = CAUSAL_DILATIONS
            .iter()
            .enumerate()
            .map(|(i, &dil)| HighwayLayer::new(s, &format!("dec.hw{i}"), d, k, dil, true, rng))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let dec_post = Conv1dLayer::new(s, "dec.post", d, d, 1, 1, true, rng)?;
        let dec_out = Conv1dLayer::new(s, "dec.out", d, m, 1, 1, true, rng)?;
        Ok(Text2Mel {
            hparams,
            store,
            embedding,
            text_pre,
            text_highways,
            audio_pre,
            audio_highways,
            dec_pre,
            dec_highways,
            dec_post,
            dec_out,
        })
    }

    pub fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Text2MelError::InvalidInput("empty symbol id sequence".into()));
        }
        if ids.last() != Some(&EOS_ID) {
            return Err(Text2MelError::InvalidInput("symbol id sequence must end with EOS".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.hparams.vocab_size) {
            return Err(crate::nnet::NnetError::IdOutOfRange { id: bad, vocab: self.hparams.vocab_size }.into());
        }
        Ok(())
    }

    fn check_mel(&self, mel: &Tensor<T>) -> Result<()> {
        let (c, t) = mel.dims2().map_err(Text2MelError::Nnet)?;
        if c != self.hparams.n_mels {
            return Err(Text2MelError::ChannelMismatch { expected: self.hparams.n_mels, found: c });
        }
        if t == 0 {
            return Err(Text2MelError::InvalidInput("mel prefix has no frames".into()));
        }
        Ok(())
    }

    /// Keys and values `[d, N]`.
    pub fn encode_text(&self, tape: &mut Tape<T>, ids: &[usize]) -> Result<(Var, Var)> {
        self.check_ids(ids)?;
        let table = tape.param(&self.store, self.embedding)?;
        let x = tape.embedding(table, ids)?;
        let x = self.text_pre.forward(tape, &self.store, x)?;
        let mut x = tape.relu(x)?;
        for hw in &self.text_highways {
            x = hw.forward(tape, &self.store, x)?;
        }
        let d = self.hparams.hidden;
        Ok((tape.slice_rows(x, 0, d)?, tape.slice_rows(x, d, d)?))
    }

    /// Full forward pass. `mel_prefix` is the shifted teacher-forcing input.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        ids: &[usize],
        mel_prefix: Var,
        windows: Option<&[Option<(usize, usize)>]>,
    ) -> Result<T2mVars> {
        self.check_mel(tape.value(mel_prefix))?;
        let (keys, values) = self.encode_text(tape, ids)?;
        let mut q = mel_prefix;
        for conv in &self.audio_pre {
            let h = conv.forward(tape, &self.store, q)?;
            q = tape.relu(h)?;
        }
        for hw in &self.audio_highways {
            q = hw.forward(tape, &self.store, q)?;
        }
        let (read, attention) = scaled_dot_attention(tape, q, keys, values, windows)?;
        let x = tape.concat_rows(read, q)?;
        let mut x = self.dec_pre.forward(tape, &self.store, x)?;
        for hw in &self.dec_highways {
            x = hw.forward(tape, &self.store, x)?;
        }
        let x = self.dec_post.forward(tape, &self.store, x)?;
        let x = tape.relu(x)?;
        let logits = self.dec_out.forward(tape, &self.store, x)?;
        let mel = tape.sigmoid(logits)?;
        Ok(T2mVars { logits, mel, attention })
    }

    /// Predicted frames `[n_mels, T]` and attention for a teacher-forcing
    /// prefix, without gradient bookkeeping.
    pub fn infer(&self, ids: &[usize], mel_prefix: &Tensor<T>) -> Result<(Tensor<T>, AttentionMatrix<T>)> {
        self.infer_windowed(ids, mel_prefix, None)
    }

    pub(crate) fn infer_windowed(
        &self,
        ids: &[usize],
        mel_prefix: &Tensor<T>,
        windows: Option<&[Option<(usize, usize)>]>,
    ) -> Result<(Tensor<T>, AttentionMatrix<T>)> {
        let mut tape = Tape::new();
        let prefix = tape.constant(mel_prefix.clone())?;
        let out = self.forward(&mut tape, ids, prefix, windows)?;
        Ok((tape.value(out.mel).clone(), AttentionMatrix::new(tape.value(out.attention).clone(), ids.to_vec())))
    }

    /// Teacher-forced training loss against `target: [n_mels, T]`.
    pub fn loss(&self, tape: &mut Tape<T>, ids: &[usize], target: &Tensor<T>, w: &LossWeights) -> Result<(T2mLoss, T2mVars)> {
        self.check_mel(target)?;
        let prefix = tape.constant(shift_right(target))?;
        let out = self.forward(tape, ids, prefix, None)?;
        let l1 = tape.l1_loss(out.mel, target.clone())?;
        let bd = tape.binary_divergence_logits(out.logits, target.clone())?;
        let ga = tape.guided_attention_loss(out.attention, T::lit(w.guided_width))?;
        let a = tape.scale(l1, T::lit(w.l1))?;
        let b = tape.scale(bd, T::lit(w.binary_divergence))?;
        let c = tape.scale(ga, T::lit(w.guided_attention))?;
        let ab = tape.add(a, b)?;
        let total = tape.add(ab, c)?;
        Ok((T2mLoss { total, l1, binary_divergence: bd, guided_attention: ga }, out))
    }

    pub fn all_finite(&self) -> bool {
        self.store.iter().all(|(_, p)| p.value.all_finite())
    }
}
