//! Per-utterance feature cache keyed by the DSP fingerprint.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use laughtts::annotation::Manifest;
use laughtts::dsp::{load_wav, DspConfig, MelAnalyzer};
use laughtts::nnet::Tensor;
use serde::{Deserialize, Serialize};

const MAGIC: &[u8; 8] = b"LTTSFEAT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureHeader {
    pub id: String,
    pub dsp_fingerprint: String,
    /// `[frames, n_mels]`, full frame rate.
    pub mel_shape: [usize; 2],
    /// `[frames, n_bins]`.
    pub mag_shape: [usize; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub header: FeatureHeader,
    pub mel: Tensor<f32>,
    pub mag: Tensor<f32>,
}

pub fn feature_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.feat"))
}

pub fn write_features(path: &Path, f: &Features) -> anyhow::Result<()> {
    let header = serde_json::to_vec(&f.header)?;
    let mut bytes = Vec::with_capacity(16 + header.len() + 4 * (f.mel.len() + f.mag.len()));
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header);
    for v in f.mel.data().iter().chain(f.mag.data()) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let tmp = path.with_extension("feat.tmp");
    let mut file = std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

pub fn read_header(path: &Path) -> anyhow::Result<(FeatureHeader, Vec<u8>)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        bail!("{}: not a feature file", path.display());
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes")) as usize;
    let header: FeatureHeader = serde_json::from_slice(bytes.get(12..12 + n).context("truncated header")?)
        .with_context(|| format!("{}: header", path.display()))?;
    Ok((header, bytes[12 + n..].to_vec()))
}

pub fn read_features(path: &Path) -> anyhow::Result<Features> {
    let (header, payload) = read_header(path)?;
    let [mr, mc] = header.mel_shape;
    let [ar, ac] = header.mag_shape;
    if payload.len() != 4 * (mr * mc + ar * ac) {
        bail!("{}: payload has {} bytes, header implies {}", path.display(), payload.len(), 4 * (mr * mc + ar * ac));
    }
    let floats: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("four bytes"))).collect();
    let mel = Tensor::from_vec(&[mr, mc], floats[..mr * mc].to_vec())?;
    let mag = Tensor::from_vec(&[ar, ac], floats[mr * mc..].to_vec())?;
    Ok(Features { header, mel, mag })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreprocessSummary {
    pub computed: usize,
    pub cached: usize,
}

/// Computes features for every utterance whose cache entry is missing or
/// was produced with a different DSP configuration.
pub fn preprocess(manifest: &Manifest, dsp: &DspConfig, out_dir: &Path) -> anyhow::Result<PreprocessSummary> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let fingerprint = dsp.fingerprint();
    let analyzer = MelAnalyzer::<f32>::new(dsp)?;
    let mut summary = PreprocessSummary::default();
    for u in &manifest.utterances {
        let path = feature_path(out_dir, &u.id);
        if path.exists() {
            // Full read so a truncated payload counts as a miss.
            match read_features(&path).map(|f| f.header) {
                Ok(h) if h.dsp_fingerprint == fingerprint => {
                    log::info!("cache hit: {}", u.id);
                    summary.cached += 1;
                    continue;
                }
                Ok(h) => log::info!("stale features for {} (fingerprint {}), recomputing", u.id, h.dsp_fingerprint),
                Err(e) => log::warn!("unreadable cache entry for {}: {e:#}; recomputing", u.id),
            }
        }
        let wave = load_wav::<f32>(manifest.audio_path(u), dsp.sample_rate)?;
        let (mel, mag) = analyzer.analyze(&wave, 1)?;
        let header = FeatureHeader {
            id: u.id.clone(),
            dsp_fingerprint: fingerprint.clone(),
            mel_shape: [mel.frames.rows(), mel.frames.cols()],
            mag_shape: [mag.frames.rows(), mag.frames.cols()],
        };
        write_features(&path, &Features { header, mel: mel.frames, mag: mag.frames })?;
        summary.computed += 1;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = feature_path(dir.path(), "u1");
        let f = Features {
            header: FeatureHeader { id: "u1".into(), dsp_fingerprint: "abc".into(), mel_shape: [2, 3], mag_shape: [2, 2] },
            mel: Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
            mag: Tensor::from_vec(&[2, 2], vec![0.5, -0.5, 0.25, 8.0]).unwrap(),
        };
        write_features(&path, &f).unwrap();
        assert_eq!(read_features(&path).unwrap(), f);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(read_features(&path).is_err());
        std::fs::write(&path, b"garbage").unwrap();
        assert!(read_header(&path).is_err());
    }
}
