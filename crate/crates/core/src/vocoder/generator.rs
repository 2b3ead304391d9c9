use rand::Rng;
use serde::{Deserialize, Serialize};

use super::VocoderError;
use crate::dsp::{DspConfig, Waveform};
use crate::nnet::{Conv1dLayer, ConvTranspose1dLayer, ParamStore, Tape, Tensor, Var};
use crate::real::Real;

const LEAK: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorHparams {
    pub n_mels: usize,
    /// Channels after the input convolution; halved by every upsampling stage.
    pub channels: usize,
    /// Upsampling factor of each stage; their product is the hop length.
    pub upsample: Vec<usize>,
    pub dilations: Vec<usize>,
    pub dsp_fingerprint: String,
}

impl GeneratorHparams {
    pub fn new(dsp: &DspConfig) -> Self {
        GeneratorHparams {
            n_mels: dsp.n_mels,
            channels: 64,
            upsample: vec![8, 8, 2, 2],
            dilations: vec![1, 3, 9],
            dsp_fingerprint: dsp.fingerprint(),
        }
    }

    pub fn hop(&self) -> usize {
        self.upsample.iter().product()
    }

    pub fn validate(&self, dsp: Option<&DspConfig>) -> Result<(), VocoderError> {
        if self.n_mels == 0 || self.channels == 0 || self.upsample.is_empty() || self.upsample.contains(&0) {
            return Err(VocoderError::InvalidConfig("generator widths and factors must be positive".into()));
        }
        if self.dilations.contains(&0) {
            return Err(VocoderError::InvalidConfig("dilations must be positive".into()));
        }
        if let Some(dsp) = dsp {
            if self.hop() != dsp.hop_length {
                return Err(VocoderError::InvalidConfig(format!(
                    "generator upsamples by {}, hop length is {}",
                    self.hop(),
                    dsp.hop_length
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
struct ResidualLayer {
    dilated: Conv1dLayer,
    pointwise: Conv1dLayer,
}

/// `x + conv1(lrelu(conv_d(lrelu(x))))` from explicit parameter nodes.
#[allow(clippy::too_many_arguments)]
pub fn residual_block<T: Real>(
    tape: &mut Tape<T>,
    x: Var,
    w_dilated: Var,
    b_dilated: Var,
    w_point: Var,
    b_point: Var,
    dilation: usize,
) -> Result<Var, crate::nnet::NnetError> {
    let slope = T::lit(LEAK);
    let h = tape.leaky_relu(x, slope)?;
    let h = tape.conv1d(h, w_dilated, Some(b_dilated), dilation, false)?;
    let h = tape.leaky_relu(h, slope)?;
    let h = tape.conv1d(h, w_point, Some(b_point), 1, false)?;
    tape.add(x, h)
}

#[derive(Clone, Debug, PartialEq)]
struct Stage {
    up: ConvTranspose1dLayer,
    residual: Vec<ResidualLayer>,
}

/// Fully convolutional mel-to-waveform generator.
#[derive(Clone, Debug)]
pub struct Generator<T: Real> {
    pub hparams: GeneratorHparams,
    pub store: ParamStore<T>,
    input: Conv1dLayer,
    stages: Vec<Stage>,
    output: Conv1dLayer,
}

fn stage_channels(base: usize, stage: usize) -> usize {
    (base >> stage).max(2)
}

impl<T: Real> Generator<T> {
    pub fn new<R: Rng + ?Sized>(hparams: GeneratorHparams, rng: &mut R) -> Result<Self, VocoderError> {
        hparams.validate(None)?;
        let mut store = ParamStore::new();
        let s = &mut store;
        let input = Conv1dLayer::new(s, "gen.input", hparams.n_mels, hparams.channels, 7, 1, false, rng)?;
        let mut stages = Vec::new();
        for (u, &factor) in hparams.upsample.iter().enumerate() {
            let (cin, cout) = (stage_channels(hparams.channels, u), stage_channels(hparams.channels, u + 1));
            let up = ConvTranspose1dLayer::new(s, &format!("gen.up{u}"), cin, cout, 2 * factor, factor, rng)?;
            let residual = hparams
                .dilations
                .iter()
                .enumerate()
                .map(|(j, &d)| {
                    Ok(ResidualLayer {
                        dilated: Conv1dLayer::new(s, &format!("gen.up{u}.res{j}.dilated"), cout, cout, 3, d, false, rng)?,
                        pointwise: Conv1dLayer::new(s, &format!("gen.up{u}.res{j}.point"), cout, cout, 1, 1, false, rng)?,
                    })
                })
                .collect::<Result<Vec<_>, VocoderError>>()?;
            stages.push(Stage { up, residual });
        }
        let last = stage_channels(hparams.channels, hparams.upsample.len());
        let output = Conv1dLayer::new(s, "gen.output", last, 1, 7, 1, false, rng)?;
        Ok(Generator { hparams, store, input, stages, output })
    }

    /// `[n_mels, T]` mel to a `[1, T * hop]` waveform in `[-1, 1]`.
    pub fn forward(&self, tape: &mut Tape<T>, mel: Var) -> Result<Var, VocoderError> {
        let (c, t) = tape.value(mel).dims2()?;
        if c != self.hparams.n_mels {
            return Err(VocoderError::ChannelMismatch { expected: self.hparams.n_mels, found: c });
        }
        if t == 0 {
            return Err(VocoderError::InvalidInput("mel spectrogram has no frames".into()));
        }
        let slope = T::lit(LEAK);
        let mut x = self.input.forward(tape, &self.store, mel)?;
        for stage in &self.stages {
            x = tape.leaky_relu(x, slope)?;
            x = stage.up.forward(tape, &self.store, x)?;
            for r in &stage.residual {
                let wd = tape.param(&self.store, r.dilated.weight)?;
                let bd = tape.param(&self.store, r.dilated.bias)?;
                let wp = tape.param(&self.store, r.pointwise.weight)?;
                let bp = tape.param(&self.store, r.pointwise.bias)?;
                x = residual_block(tape, x, wd, bd, wp, bp, r.dilated.dilation)?;
            }
        }
        let x = tape.leaky_relu(x, slope)?;
        let x = self.output.forward(tape, &self.store, x)?;
        Ok(tape.tanh(x)?)
    }

    /// Waveform of exactly `hop * T` samples.
    pub fn generate(&self, mel: &Tensor<T>, sample_rate: u32) -> Result<Waveform<T>, VocoderError> {
        let mut tape = Tape::new();
        let x = tape.constant(mel.clone())?;
        let y = self.forward(&mut tape, x)?;
        Ok(Waveform::new(tape.value(y).data().to_vec(), sample_rate)?)
    }
}

/// Free-function form of [`Generator::generate`].
pub fn melgan_generate<T: Real>(mel: &Tensor<T>, g: &Generator<T>, sample_rate: u32) -> Result<Waveform<T>, VocoderError> {
    g.generate(mel, sample_rate)
}
