//! Rule-based synthetic corpus: every symbol maps to a fixed acoustic
//! recipe so the symbol/acoustics relation is learnable at desk scale.
//!
//! * `LV`: harmonic burst whose fundamental and vowel colouring depend on the
//!   vowel context.
//! * `LU`: high-passed noise burst.
//! * phones: two-partial tones at a phone-specific frequency.
//!
//! Segments are separated by short silences.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, Utterance};
use super::symbols::{parse_inventory, Style, VowelContext, DEFAULT_PHONES, LAUGH_UNVOICED, LAUGH_VOICED};
use super::AnnotationError;
use crate::dsp::{save_wav, Waveform};

pub const MANIFEST_FILE: &str = "manifest.tsv";

const MIN_SECS: f64 = 0.5;
const MAX_SECS: f64 = 3.0;
const EDGE_SECS: f64 = 0.05;
const PEAK: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthCorpusConfig {
    pub corpus: String,
    pub sample_rate: u32,
    pub speaker: String,
    /// Multiplies every fundamental; models a different voice.
    pub pitch_scale: f64,
    /// Styles drawn uniformly per utterance.
    pub styles: Vec<Style>,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        SynthCorpusConfig {
            corpus: "synth".into(),
            sample_rate: 22050,
            speaker: "spk0".into(),
            pitch_scale: 1.0,
            styles: Style::ALL.to_vec(),
        }
    }
}

/// One rendered symbol, in samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthSegment {
    pub symbol: String,
    pub start: usize,
    pub end: usize,
}

fn context_f0(ctx: Option<VowelContext>) -> f64 {
    match ctx {
        Some(VowelContext::A) => 200.0,
        Some(VowelContext::E) => 240.0,
        Some(VowelContext::I) => 280.0,
        None => 220.0,
    }
}

fn context_formants(ctx: Option<VowelContext>) -> [f64; 2] {
    match ctx {
        Some(VowelContext::A) | None => [730.0, 1090.0],
        Some(VowelContext::E) => [530.0, 1840.0],
        Some(VowelContext::I) => [270.0, 2290.0],
    }
}

fn phone_freq(index: usize) -> f64 {
    160.0 * 1.07f64.powi(index as i32)
}

/// Raised-cosine attack and release of `ramp` samples.
fn envelope(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / ramp as f64).cos()
    }
}

struct Renderer<'a> {
    cfg: &'a SynthCorpusConfig,
    phones: Vec<String>,
    rng: ChaCha8Rng,
}

impl Renderer<'_> {
    fn secs(&mut self, lo: f64, hi: f64) -> usize {
        (self.rng.random_range(lo..hi) * self.cfg.sample_rate as f64) as usize
    }

    fn burst(&mut self, symbol: &str, ctx: Option<VowelContext>, pitch: f64) -> Vec<f64> {
        let sr = self.cfg.sample_rate as f64;
        let nyquist = sr / 2.0;
        let ramp = (0.01 * sr) as usize;
        if symbol == LAUGH_VOICED {
            let len = self.secs(0.09, 0.15);
            let f0 = context_f0(ctx) * pitch * self.rng.random_range(0.96..1.04);
            let formants = context_formants(ctx);
            let partials: Vec<(f64, f64)> = (1..=10)
                .map(|h| h as f64 * f0)
                .filter(|&f| f < nyquist * 0.9)
                .map(|f| {
                    let colour: f64 = formants.iter().map(|&fm| (-((f - fm) / 150.0).powi(2)).exp()).sum();
                    (f, 0.15 + colour)
                })
                .collect();
            (0..len)
                .map(|i| {
                    let t = i as f64 / sr;
                    let s: f64 = partials.iter().map(|&(f, a)| a * (TAU * f * t).sin()).sum();
                    s * envelope(i, len, ramp)
                })
                .collect()
        } else if symbol == LAUGH_UNVOICED {
            let len = self.secs(0.06, 0.11);
            let mut prev = 0.0;
            (0..len)
                .map(|i| {
                    let n: f64 = self.rng.sample(StandardNormal);
                    let hp = n - 0.7 * prev;
                    prev = n;
                    0.5 * hp * envelope(i, len, ramp)
                })
                .collect()
        } else {
            let len = self.secs(0.07, 0.12);
            let index = self.phones.iter().position(|p| p == symbol).unwrap_or(0);
            let f = phone_freq(index) * pitch;
            (0..len)
                .map(|i| {
                    let t = i as f64 / sr;
                    ((TAU * f * t).sin() + 0.4 * (TAU * 2.0 * f * t).sin()) * envelope(i, len, ramp)
                })
                .collect()
        }
    }

    fn render(&mut self, symbols: &[String], ctx: Option<VowelContext>, pitch: f64) -> (Vec<f64>, Vec<SynthSegment>) {
        let sr = self.cfg.sample_rate as f64;
        let edge = (EDGE_SECS * sr) as usize;
        let mut audio = vec![0.0; edge];
        let mut segments = Vec::with_capacity(symbols.len());
        for (k, sym) in symbols.iter().enumerate() {
            if k > 0 {
                let gap = self.secs(0.03, 0.05);
                audio.resize(audio.len() + gap, 0.0);
            }
            let burst = self.burst(sym, ctx, pitch);
            segments.push(SynthSegment { symbol: sym.clone(), start: audio.len(), end: audio.len() + burst.len() });
            audio.extend(burst);
        }
        audio.resize(audio.len() + edge, 0.0);
        let min_len = (MIN_SECS * sr).ceil() as usize;
        if audio.len() < min_len {
            audio.resize(min_len, 0.0);
        }
        let peak = audio.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if peak > 0.0 {
            audio.iter_mut().for_each(|v| *v *= PEAK / peak);
        }
        (audio, segments)
    }

    fn laugh_symbols(&mut self, n: usize) -> Vec<String> {
        (0..n)
            .map(|k| if k == 0 || self.rng.random_bool(0.6) { LAUGH_VOICED } else { LAUGH_UNVOICED }.to_string())
            .collect()
    }

    fn phone_symbols(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.phones[self.rng.random_range(0..self.phones.len())].clone()).collect()
    }

    fn utterance(&mut self, style: Style) -> (Vec<String>, Option<VowelContext>) {
        match style {
            Style::Laugh => {
                let ctx = VowelContext::ALL[self.rng.random_range(0..3)];
                let n = self.rng.random_range(2..=6);
                (self.laugh_symbols(n), Some(ctx))
            }
            Style::Speech | Style::SmiledSpeech => {
                let n = self.rng.random_range(3..=8);
                (self.phone_symbols(n), None)
            }
            Style::SpeechLaugh => {
                let n = self.rng.random_range(3..=6);
                let mut syms = self.phone_symbols(n);
                for _ in 0..self.rng.random_range(1..=2) {
                    let at = self.rng.random_range(1..=syms.len());
                    syms.insert(at, LAUGH_VOICED.to_string());
                }
                (syms, None)
            }
        }
    }
}

fn style_pitch(style: Style) -> f64 {
    match style {
        Style::SmiledSpeech => 1.1,
        _ => 1.0,
    }
}

/// Renders one symbol sequence without touching the filesystem.
pub fn render_symbols(
    symbols: &[String],
    style: Style,
    ctx: Option<VowelContext>,
    cfg: &SynthCorpusConfig,
    seed: u64,
) -> (Waveform<f64>, Vec<SynthSegment>) {
    let mut r = Renderer { cfg, phones: parse_inventory(DEFAULT_PHONES), rng: ChaCha8Rng::seed_from_u64(seed) };
    let (audio, segments) = r.render(symbols, ctx, cfg.pitch_scale * style_pitch(style));
    (Waveform { samples: audio, sample_rate: cfg.sample_rate }, segments)
}

/// Writes `n_utts` WAV files and `manifest.tsv` into `out_dir`. The output is
/// a pure function of `(seed, n_utts, cfg)`.
pub fn generate_synthetic_corpus(
    seed: u64,
    n_utts: usize,
    cfg: &SynthCorpusConfig,
    out_dir: &Path,
) -> Result<Manifest, AnnotationError> {
    let invalid = |message: &str| Err(AnnotationError::InvalidUtterance { id: cfg.corpus.clone(), message: message.into() });
    if n_utts == 0 {
        return invalid("synthetic corpus needs at least one utterance");
    }
    if cfg.styles.is_empty() {
        return invalid("no styles to draw from");
    }
    if !(cfg.pitch_scale.is_finite() && cfg.pitch_scale > 0.2 && cfg.pitch_scale < 3.0) {
        return invalid("pitch_scale must lie in (0.2, 3)");
    }
    if cfg.sample_rate < 8000 {
        return invalid("sample rate below 8 kHz");
    }
    std::fs::create_dir_all(out_dir).map_err(|source| AnnotationError::Io { path: out_dir.display().to_string(), source })?;
    let mut r = Renderer { cfg, phones: parse_inventory(DEFAULT_PHONES), rng: ChaCha8Rng::seed_from_u64(seed) };
    let mut manifest = Manifest::new(cfg.corpus.clone(), cfg.sample_rate);
    manifest.base_dir = out_dir.to_path_buf();
    for i in 0..n_utts {
        let style = cfg.styles[r.rng.random_range(0..cfg.styles.len())];
        let (symbols, ctx) = r.utterance(style);
        let (audio, _) = r.render(&symbols, ctx, cfg.pitch_scale * style_pitch(style));
        debug_assert!(audio.len() as f64 / (cfg.sample_rate as f64) <= MAX_SECS);
        let id = format!("{}_{i:04}", cfg.corpus);
        let file = format!("{id}.wav");
        save_wav(out_dir.join(&file), &Waveform { samples: audio, sample_rate: cfg.sample_rate })?;
        manifest.utterances.push(Utterance {
            id,
            symbols,
            audio_path: file,
            style,
            vowel_context: ctx,
            speaker: cfg.speaker.clone(),
        });
    }
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts runs of 10 ms frames whose RMS exceeds 2% of the loudest frame.
    fn count_segments(x: &[f64], rate: u32) -> usize {
        let frame = rate as usize / 100;
        let rms: Vec<f64> =
            x.chunks(frame).map(|c| (c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).sqrt()).collect();
        let max = rms.iter().cloned().fold(0.0, f64::max);
        let mut runs = 0;
        let mut active = false;
        for &r in &rms {
            let on = r > 0.02 * max;
            if on && !active {
                runs += 1;
            }
            active = on;
        }
        runs
    }

    #[test]
    fn two_laugh_labels_give_two_segments() {
        let cfg = SynthCorpusConfig::default();
        let syms = vec!["LV".to_string(), "LU".to_string()];
        for seed in 0..5 {
            let (w, segs) = render_symbols(&syms, Style::Laugh, Some(VowelContext::A), &cfg, seed);
            assert_eq!(segs.len(), 2);
            assert_eq!(count_segments(&w.samples, cfg.sample_rate), 2, "seed {seed}");
            assert!(w.duration_secs() >= 0.5);
        }
    }

    #[test]
    fn segments_match_symbol_count() {
        let cfg = SynthCorpusConfig::default();
        let syms: Vec<String> = "LV LU LV LV LU".split(' ').map(String::from).collect();
        let (w, _) = render_symbols(&syms, Style::Laugh, Some(VowelContext::I), &cfg, 3);
        assert_eq!(count_segments(&w.samples, cfg.sample_rate), 5);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = SynthCorpusConfig::default();
        let ma = generate_synthetic_corpus(7, 12, &cfg, a.path()).unwrap();
        generate_synthetic_corpus(7, 12, &cfg, b.path()).unwrap();
        let ta = std::fs::read(a.path().join(MANIFEST_FILE)).unwrap();
        let tb = std::fs::read(b.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(ta, tb);
        for u in &ma.utterances {
            let wa = std::fs::read(a.path().join(&u.audio_path)).unwrap();
            let wb = std::fs::read(b.path().join(&u.audio_path)).unwrap();
            assert_eq!(wa, wb);
        }
    }

    #[test]
    fn utterances_are_valid_and_in_range() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthCorpusConfig::default();
        let m = generate_synthetic_corpus(11, 30, &cfg, dir.path()).unwrap();
        let table = crate::annotation::SymbolTable::standard();
        let reread = crate::annotation::read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(reread.utterances, m.utterances);
        for u in &m.utterances {
            crate::annotation::encode_utterance(u, &table).unwrap();
            let secs = crate::dsp::wav_duration_secs(m.audio_path(u)).unwrap();
            assert!((0.5..=3.0).contains(&secs), "{} lasts {secs}", u.id);
        }
    }

    #[test]
    fn zero_utterances_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate_synthetic_corpus(1, 0, &SynthCorpusConfig::default(), dir.path()).is_err());
    }
}
