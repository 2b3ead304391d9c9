//! `laughtts`: corpus generation, feature caching, training, synthesis and
//! evaluation from one binary.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.

mod commands;
mod config;
mod features;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Marks an error as a usage or validation problem (exit code 2).
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Invalid(msg.into()))
}

#[derive(Parser, Debug)]
#[command(name = "laughtts", version, about = "Laughter and amused speech synthesis pipeline")]
pub struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Pretrain,
    Finetune,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VocoderArg {
    Gl,
    Melgan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a deterministic synthetic corpus (WAVs plus manifest.tsv).
    CorpusSynth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Corpus name used in file names and the manifest header.
        #[arg(long, default_value = "synth")]
        corpus: String,
        /// Comma-separated styles to draw from (speech, smiled_speech, laugh, speech_laugh).
        #[arg(long, value_delimiter = ',')]
        styles: Option<Vec<String>>,
        #[arg(long)]
        pitch_scale: Option<f64>,
    },
    /// Cache mel and magnitude features per utterance.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the acoustic model and SSRN for one stage.
    Train {
        #[arg(long, value_enum)]
        stage: StageArg,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        /// Pretrained acoustic model (finetune only).
        #[arg(long)]
        init_t2m: Option<PathBuf>,
        /// Pretrained SSRN (finetune only).
        #[arg(long)]
        init_ssrn: Option<PathBuf>,
    },
    /// Train the waveform corrector on a corpus.
    TrainVocoder {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Synthesize a symbol sequence to a WAV file plus a JSON sidecar.
    Synth {
        /// Whitespace-separated symbols, e.g. "STYLE_LAUGH CTX_A LV LU LV".
        #[arg(long)]
        symbols: String,
        #[arg(long, value_enum, default_value = "gl")]
        vocoder: VocoderArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        t2m: Option<PathBuf>,
        #[arg(long)]
        ssrn: Option<PathBuf>,
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long)]
        max_frames: Option<usize>,
    },
    /// Objective spectral distances between two WAV files.
    EvalObjective {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        est: PathBuf,
    },
    /// Listening-test statistics from a rating store.
    MosStats {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Run the listening-test HTTP service.
    MosServe {
        /// Service TOML; `LAUGHTTS_MOS_*` environment variables override it.
        #[arg(long = "service-config")]
        service_config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Finite-difference check of every differentiable op.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long, default_value_t = laughtts::diagnostics::GRAD_TOLERANCE)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.downcast_ref::<Invalid>().is_some()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
