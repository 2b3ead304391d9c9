use std::path::{Path, PathBuf};

use anyhow::Context;
use laughtts::dsp::DspConfig;
use laughtts::train::TrainConfig;
use laughtts::vocoder::GlConfig;
use serde::{Deserialize, Serialize};

use crate::invalid;

/// Everything a pipeline run needs. `dsp` and `seed` live at the top level
/// and are copied into the training section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct GlobalConfig {
    pub seed: u64,
    pub dsp: DspConfig,
    pub paths: Paths,
    pub train: TrainConfig,
    pub synth: SynthSection,
    pub vocoder: VocoderSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Feature cache written by `preprocess`.
    pub features: PathBuf,
    /// Default location of `t2m.ckpt`, `ssrn.ckpt` and `generator.ckpt`.
    pub checkpoints: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { features: "features".into(), checkpoints: "checkpoints".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub max_frames: usize,
    pub monotonic: bool,
    pub gl: GlConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection { max_frames: 200, monotonic: true, gl: GlConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VocoderSection {
    pub channels: usize,
    /// Upsampling factor per stage; the product must equal the hop length.
    pub upsample: Vec<usize>,
    pub steps: usize,
    pub lr: f64,
    /// Training excerpts are cut to this many frames.
    pub segment_frames: usize,
    pub max_utterances: usize,
}

impl Default for VocoderSection {
    fn default() -> Self {
        VocoderSection { channels: 64, upsample: vec![8, 8, 2, 2], steps: 2000, lr: 1e-3, segment_frames: 32, max_utterances: 8 }
    }
}


impl GlobalConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let raw: toml::Table = toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        if let Some(train) = raw.get("train").and_then(|t| t.as_table()) {
            for key in ["dsp", "seed"] {
                if train.contains_key(key) {
                    return Err(invalid(format!("config: set `{key}` at the top level, not under [train]")));
                }
            }
        }
        let mut cfg: GlobalConfig = toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.sync();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => {
                let mut cfg = GlobalConfig::default();
                cfg.sync();
                Ok(cfg)
            }
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| invalid(format!("config {}: {e}", p.display())))?;
                Self::parse(&text).with_context(|| format!("loading {}", p.display()))
            }
        }
    }

    /// Copies the shared fields into the training section.
    pub fn sync(&mut self) {
        self.train.dsp = self.dsp.clone();
        self.train.seed = self.seed;
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.dsp.validate().map_err(|e| invalid(format!("config: {e}")))?;
        if self.synth.max_frames == 0 {
            return Err(invalid("config: synth.max_frames must be positive"));
        }
        let hop: usize = self.vocoder.upsample.iter().product();
        if hop != self.dsp.hop_length {
            return Err(invalid(format!(
                "config: vocoder.upsample multiplies to {hop}, dsp.hop_length is {}",
                self.dsp.hop_length
            )));
        }
        Ok(())
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.paths.checkpoints.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_unknown_keys_fail() {
        let cfg = GlobalConfig::parse("seed = 4\n[dsp]\nn_mels = 40\n").unwrap();
        assert_eq!(cfg.train.seed, 4);
        assert_eq!(cfg.train.dsp.n_mels, 40);
        assert!(GlobalConfig::parse("sed = 4\n").is_err());
        assert!(GlobalConfig::parse("[train]\nseed = 1\n").is_err());
        assert!(GlobalConfig::parse("[vocoder]\nupsample = [4, 4]\n").is_err());
        let mut table = toml::Table::try_from(GlobalConfig::default()).unwrap();
        let train = table["train"].as_table_mut().unwrap();
        train.remove("dsp");
        train.remove("seed");
        let text = toml::to_string(&table).unwrap();
        assert_eq!(GlobalConfig::parse(&text).unwrap(), GlobalConfig::default());
    }
}
