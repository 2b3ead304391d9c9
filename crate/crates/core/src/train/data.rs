use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::annotation::{encode_utterance, Manifest, Style, SymbolTable, Utterance};
use crate::dsp::{load_wav, DspConfig, MelAnalyzer};
use crate::nnet::Tensor;
use crate::real::Real;

/// One training triple, channels-first.
#[derive(Clone, Debug, PartialEq)]
pub struct Example<T: Real> {
    pub id: String,
    pub style: Style,
    pub ids: Vec<usize>,
    /// `[n_mels, T]` coarse mel frames.
    pub mel: Tensor<T>,
    /// `[n_bins, T * reduction]` full-rate magnitudes, zero-padded at the end.
    pub mag: Tensor<T>,
}

impl<T: Real> Example<T> {
    pub fn frames(&self) -> usize {
        self.mel.cols()
    }
}

/// Styles allowed in the fine-tuning corpus.
pub const FINETUNE_STYLES: [Style; 3] = [Style::Laugh, Style::SmiledSpeech, Style::SpeechLaugh];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Finetune,
}

/// Features for one utterance.
pub fn prepare_example<T: Real>(
    u: &Utterance,
    manifest: &Manifest,
    table: &SymbolTable,
    analyzer: &MelAnalyzer<T>,
) -> Result<Example<T>, TrainError> {
    let ids = encode_utterance(u, table)?;
    let cfg = analyzer.config();
    let wave = load_wav::<T>(manifest.audio_path(u), cfg.sample_rate)?;
    let r = cfg.reduction_factor;
    let (mel, mag) = analyzer.analyze(&wave, r)?;
    let t = mel.n_frames();
    let mel = mel.frames.transpose2();
    let full = mag.frames;
    let (frames, bins) = (full.rows(), full.cols());
    let mag = Tensor::from_fn2(bins, t * r, |b, f| if f < frames { full.at(f, b) } else { T::zero() });
    Ok(Example { id: u.id.clone(), style: u.style, ids, mel, mag })
}

/// Features for every utterance of a manifest, in manifest order.
pub fn load_examples<T: Real>(
    manifest: &Manifest,
    table: &SymbolTable,
    dsp: &DspConfig,
) -> Result<Vec<Example<T>>, TrainError> {
    let analyzer = MelAnalyzer::new(dsp)?;
    manifest.utterances.iter().map(|u| prepare_example(u, manifest, table, &analyzer)).collect()
}

/// Rejects fine-tuning corpora containing styles outside [`FINETUNE_STYLES`].
pub fn check_finetune_styles(manifest: &Manifest) -> Result<(), TrainError> {
    match manifest.utterances.iter().find(|u| !FINETUNE_STYLES.contains(&u.style)) {
        Some(u) => Err(TrainError::StyleNotAllowed { id: u.id.clone(), style: u.style }),
        None => Ok(()),
    }
}
