use serde::{Deserialize, Serialize};

use super::Text2MelError;
use crate::annotation::SymbolTable;
use crate::dsp::DspConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Text2MelHparams {
    pub vocab_size: usize,
    /// Symbol embedding width `e`.
    pub embed_dim: usize,
    /// Key/query/value width `d`.
    pub hidden: usize,
    pub n_mels: usize,
    pub reduction_factor: usize,
    pub kernel: usize,
    pub symbol_fingerprint: String,
    pub dsp_fingerprint: String,
}

impl Text2MelHparams {
    pub fn new(table: &SymbolTable, dsp: &DspConfig) -> Self {
        Text2MelHparams {
            vocab_size: table.len(),
            embed_dim: 64,
            hidden: 64,
            n_mels: dsp.n_mels,
            reduction_factor: dsp.reduction_factor,
            kernel: 3,
            symbol_fingerprint: table.fingerprint(),
            dsp_fingerprint: dsp.fingerprint(),
        }
    }

    pub fn validate(&self) -> Result<(), Text2MelError> {
        let bad = |m: &str| Err(Text2MelError::InvalidHparams(m.into()));
        if self.vocab_size < 2 {
            return bad("vocabulary needs at least PAD and EOS");
        }
        if self.embed_dim == 0 || self.hidden == 0 || self.n_mels == 0 {
            return bad("widths must be positive");
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return bad("kernel size must be odd");
        }
        if self.reduction_factor == 0 {
            return bad("reduction factor must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsrnHparams {
    pub n_mels: usize,
    pub n_bins: usize,
    pub channels: usize,
    /// Time upsampling factor; a power of two realised by stride-2 stages.
    pub reduction_factor: usize,
    pub kernel: usize,
    pub dsp_fingerprint: String,
}

impl SsrnHparams {
    pub fn new(dsp: &DspConfig) -> Self {
        SsrnHparams {
            n_mels: dsp.n_mels,
            n_bins: dsp.n_bins(),
            channels: 64,
            reduction_factor: dsp.reduction_factor,
            kernel: 3,
            dsp_fingerprint: dsp.fingerprint(),
        }
    }

    pub fn validate(&self) -> Result<(), Text2MelError> {
        let bad = |m: &str| Err(Text2MelError::InvalidHparams(m.into()));
        if self.n_mels == 0 || self.n_bins == 0 || self.channels == 0 {
            return bad("widths must be positive");
        }
        if !self.reduction_factor.is_power_of_two() {
            return bad("SSRN reduction factor must be a power of two");
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return bad("kernel size must be odd");
        }
        Ok(())
    }

    pub fn upsampling_stages(&self) -> usize {
        self.reduction_factor.trailing_zeros() as usize
    }
}

/// Relative weights of the acoustic-model loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub l1: f64,
    pub binary_divergence: f64,
    pub guided_attention: f64,
    /// Width `g` of the guided-attention penalty.
    pub guided_width: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { l1: 1.0, binary_divergence: 1.0, guided_attention: 1.0, guided_width: 0.2 }
    }
}
