use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::resample::resample;
use super::DspError;
use crate::real::Real;

/// Mono audio with its sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Real> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::InvalidConfig("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(DspError::NonFinite(format!("waveform sample {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self { samples: vec![T::zero(); len], sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        let ss: T = self.samples.iter().map(|&v| v * v).sum();
        (ss / T::from_usize_lossy(self.samples.len())).sqrt()
    }

    pub fn peak(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn cast<U: Real>(&self) -> Waveform<U> {
        Waveform { samples: self.samples.iter().map(|v| U::lit(v.to_f64_lossy())).collect(), sample_rate: self.sample_rate }
    }
}

/// Reads a PCM (8/16/24/32-bit integer) or 32-bit float WAV file, averages
/// channels to mono and resamples to `target_rate` when it differs.
pub fn load_wav<T: Real>(path: impl AsRef<Path>, target_rate: u32) -> Result<Waveform<T>, DspError> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| DspError::Wav { path: path.display().to_string(), source: e })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(DspError::Unsupported(format!("{}: zero channels", path.display())));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()
                .map_err(|e| DspError::Wav { path: path.display().to_string(), source: e })?
        }
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| DspError::Wav { path: path.display().to_string(), source: e })?,
        (fmt, bits) => {
            return Err(DspError::Unsupported(format!("{}: {bits}-bit {fmt:?} samples", path.display())));
        }
    };
    let frames = interleaved.len() / channels;
    if frames == 0 {
        return Err(DspError::Empty(path.display().to_string()));
    }
    let mono: Vec<f64> = interleaved.chunks_exact(channels).map(|c| c.iter().sum::<f64>() / channels as f64).collect();
    let mono = if spec.sample_rate != target_rate { resample(&mono, spec.sample_rate, target_rate) } else { mono };
    Waveform::new(mono.into_iter().map(T::lit).collect(), target_rate)
}

/// Writes 16-bit PCM mono; samples are clipped to `[-1, 1]`.
pub fn save_wav<T: Real>(path: impl AsRef<Path>, wave: &Waveform<T>) -> Result<(), DspError> {
    let path = path.as_ref();
    let spec = WavSpec { channels: 1, sample_rate: wave.sample_rate, bits_per_sample: 16, sample_format: SampleFormat::Int };
    let wrap = |e| DspError::Wav { path: path.display().to_string(), source: e };
    let mut writer = WavWriter::create(path, spec).map_err(wrap)?;
    for &s in &wave.samples {
        let v = (s.to_f64_lossy().clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

/// Number of samples and sample rate from the header alone.
pub fn wav_duration_secs(path: impl AsRef<Path>) -> Result<f64, DspError> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| DspError::Wav { path: path.display().to_string(), source: e })?;
    Ok(reader.duration() as f64 / reader.spec().sample_rate as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_int16(path: &Path, channels: u16, rate: u32, samples: &[i16]) {
        let spec = WavSpec { channels, sample_rate: rate, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn constant_pcm_scales_to_half() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        write_int16(&p, 1, 22050, &[16384; 100]);
        let w: Waveform<f64> = load_wav(&p, 22050).unwrap();
        assert_eq!(w.len(), 100);
        assert!(w.samples.iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn opposite_channels_average_to_silence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let inter: Vec<i16> = (0..200).map(|i| if i % 2 == 0 { (i * 37 % 2000) as i16 } else { -(((i - 1) * 37 % 2000) as i16) }).collect();
        write_int16(&p, 2, 22050, &inter);
        let w: Waveform<f32> = load_wav(&p, 22050).unwrap();
        assert_eq!(w.len(), 100);
        assert!(w.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reads_24_bit_and_float() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("24.wav");
        let spec = WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 24, sample_format: SampleFormat::Int };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(1 << 22).unwrap();
        w.finalize().unwrap();
        let wav: Waveform<f64> = load_wav(&p, 8000).unwrap();
        assert!((wav.samples[0] - 0.5).abs() < 1e-12);

        let p = dir.path().join("f.wav");
        let spec = WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 32, sample_format: SampleFormat::Float };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(-0.25f32).unwrap();
        w.finalize().unwrap();
        let wav: Waveform<f64> = load_wav(&p, 8000).unwrap();
        assert_eq!(wav.samples, vec![-0.25]);
    }

    #[test]
    fn empty_and_missing_files_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.wav");
        write_int16(&p, 1, 22050, &[]);
        assert!(matches!(load_wav::<f32>(&p, 22050), Err(DspError::Empty(_))));
        assert!(matches!(load_wav::<f32>(dir.path().join("missing.wav"), 22050), Err(DspError::Wav { .. })));
    }

    #[test]
    fn save_then_load_round_trips_within_quantisation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.wav");
        let w = Waveform::new((0..500).map(|i| ((i as f64) * 0.05).sin() * 0.8).collect::<Vec<f64>>(), 22050).unwrap();
        save_wav(&p, &w).unwrap();
        let back: Waveform<f64> = load_wav(&p, 22050).unwrap();
        assert_eq!(back.len(), w.len());
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((wav_duration_secs(&p).unwrap() - 500.0 / 22050.0).abs() < 1e-12);
    }
}
