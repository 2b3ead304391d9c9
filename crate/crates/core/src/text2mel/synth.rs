use serde::{Deserialize, Serialize};

use super::attention::{argmax_column, AttentionMatrix};
use super::model::Text2Mel;
use super::Text2MelError;
use crate::nnet::Tensor;
use crate::real::Real;

/// Human-readable description of the decoding stop rule, recorded in
/// synthesis metadata.
pub const STOP_RULE: &str = "attention mass on EOS > 0.5 for 3 consecutive frames";

const EOS_FRAMES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EosAttention,
    MaxFrames,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisOutput<T: Real> {
    /// `[n_mels, T]` coarse mel frames in `(0, 1)`.
    pub mel: Tensor<T>,
    pub attention: AttentionMatrix<T>,
    pub stop: StopReason,
}

impl<T: Real> SynthesisOutput<T> {
    /// True when decoding hit `max_frames` before the stop rule fired.
    pub fn truncated(&self) -> bool {
        self.stop == StopReason::MaxFrames
    }
}

/// Greedy autoregressive decoding. With `monotonic`, frame `t` may only
/// attend to symbols `prev - 1 ..= prev + 3` where `prev` is the most
/// attended symbol of frame `t - 1`.
pub fn synthesize_mel<T: Real>(
    model: &Text2Mel<T>,
    ids: &[usize],
    max_frames: usize,
    monotonic: bool,
) -> Result<SynthesisOutput<T>, Text2MelError> {
    if max_frames == 0 {
        return Err(Text2MelError::InvalidInput("max_frames must be at least 1".into()));
    }
    model.check_ids(ids)?;
    let n_mels = model.hparams.n_mels;
    let n = ids.len();
    let mut produced: Vec<Vec<T>> = Vec::new();
    let mut windows: Vec<Option<(usize, usize)>> = Vec::new();
    let mut prev = 0usize;
    let mut eos_run = 0;
    let mut last_attention = Tensor::zeros(&[n, 0]);
    let mut last_mel = Tensor::zeros(&[n_mels, 0]);
    let mut stop = StopReason::MaxFrames;
    for t in 0..max_frames {
        let prefix = Tensor::from_fn2(n_mels, t + 1, |r, c| if c == 0 { T::zero() } else { produced[c - 1][r] });
        if monotonic {
            windows.push(Some((prev.saturating_sub(1), (prev + 3).min(n - 1))));
        }
        let w = monotonic.then_some(windows.as_slice());
        let (mel, att) = model.infer_windowed(ids, &prefix, w)?;
        produced.push((0..n_mels).map(|r| mel.at(r, t)).collect());
        prev = argmax_column(&att.weights, t);
        last_attention = att.weights;
        last_mel = mel;
        if last_attention.at(n - 1, t) > T::lit(0.5) {
            eos_run += 1;
            if eos_run >= EOS_FRAMES {
                stop = StopReason::EosAttention;
                break;
            }
        } else {
            eos_run = 0;
        }
    }
    Ok(SynthesisOutput { mel: last_mel, attention: AttentionMatrix::new(last_attention, ids.to_vec()), stop })
}
