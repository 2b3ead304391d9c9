use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DspError;

/// Feature-extraction hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DspConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop_length: usize,
    pub win_length: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub preemphasis: f64,
    pub ref_db: f64,
    pub max_db: f64,
    /// Keep every r-th mel frame for the acoustic model.
    pub reduction_factor: usize,
    /// Reflect-pad by `n_fft / 2` on both sides before framing.
    pub center: bool,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            n_fft: 1024,
            hop_length: 256,
            win_length: 1024,
            n_mels: 80,
            fmin: 0.0,
            fmax: 11025.0,
            preemphasis: 0.97,
            ref_db: 20.0,
            max_db: 100.0,
            reduction_factor: 4,
            center: false,
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        let bad = |msg: String| Err(DspError::InvalidConfig(msg));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return bad(format!("n_fft must be a power of two, got {}", self.n_fft));
        }
        if !(self.hop_length >= 1 && self.hop_length <= self.win_length && self.win_length <= self.n_fft) {
            return bad(format!(
                "need 1 <= hop_length ({}) <= win_length ({}) <= n_fft ({})",
                self.hop_length, self.win_length, self.n_fft
            ));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return bad(format!("need 0 <= fmin ({}) < fmax ({}) <= {nyquist}", self.fmin, self.fmax));
        }
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1".into());
        }
        if self.reduction_factor == 0 {
            return bad("reduction_factor must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.preemphasis) {
            return bad(format!("preemphasis must lie in [0, 1), got {}", self.preemphasis));
        }
        if !(self.max_db > 0.0) {
            return bad(format!("max_db must be positive, got {}", self.max_db));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Stable short hash of every field; feature caches and checkpoints are
    /// keyed by it.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
