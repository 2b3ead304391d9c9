use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use laughtts::annotation::{generate_synthetic_corpus, read_manifest, AnnotationError, Manifest, Style, SynthCorpusConfig};
use laughtts::diagnostics::gradient_suite;
use laughtts::dsp::{load_wav, save_wav, MelAnalyzer};
use laughtts::eval::{export_results, log_mag_distance, mos_stats, read_rating_log, spectral_convergence, to_csv, ExportFormat};
use laughtts::text2mel::{synthesize_mel, STOP_RULE};
use laughtts::train::{finetune, load_ssrn, load_t2m, pretrain, Checkpoint, Stage, TrainError, SSRN_FILE, T2M_FILE};
use laughtts::vocoder::{
    corrector_pair, correct_waveform, generator_checkpoint, gl_vocode, load_generator, train_corrector_toy, CorrectionConfig,
    GeneratorHparams, ToyOptions,
};
use serde::Serialize;

use crate::config::GlobalConfig;
use crate::{features, invalid, Cli, Command, FormatArg, StageArg, VocoderArg};

pub const GENERATOR_FILE: &str = "generator.ckpt";

/// Validation-class library errors become exit code 2.
fn train_err(e: TrainError) -> anyhow::Error {
    match e {
        TrainError::InvalidConfig(_) | TrainError::StyleNotAllowed { .. } | TrainError::Annotation(_) => invalid(e.to_string()),
        other => anyhow::Error::new(other),
    }
}

fn manifest_at(path: &Path) -> anyhow::Result<Manifest> {
    if !path.exists() {
        return Err(invalid(format!("manifest {} not found", path.display())));
    }
    read_manifest(path).map_err(|e| match e {
        AnnotationError::Io { .. } => anyhow::Error::new(e),
        other => invalid(other.to_string()),
    })
}

fn existing(path: PathBuf, what: &str) -> anyhow::Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(invalid(format!("{what} checkpoint {} not found", path.display())))
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = GlobalConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::CorpusSynth { seed, n, out, corpus, styles, pitch_scale } => {
            let mut sc = SynthCorpusConfig { corpus, ..SynthCorpusConfig::default() };
            sc.sample_rate = cfg.dsp.sample_rate;
            if let Some(p) = pitch_scale {
                sc.pitch_scale = p;
            }
            if let Some(styles) = styles {
                sc.styles = styles
                    .iter()
                    .map(|s| serde_json::from_value::<Style>(serde_json::Value::String(s.clone())).map_err(|_| invalid(format!("unknown style {s:?}"))))
                    .collect::<anyhow::Result<_>>()?;
            }
            let m = generate_synthetic_corpus(seed, n, &sc, &out).map_err(|e| match e {
                AnnotationError::Io { .. } => anyhow::Error::new(e),
                other => invalid(other.to_string()),
            })?;
            println!("wrote {} utterances to {}", m.len(), out.display());
        }
        Command::Preprocess { manifest, out } => {
            let m = manifest_at(&manifest)?;
            let out = out.unwrap_or_else(|| cfg.paths.features.clone());
            let s = features::preprocess(&m, &cfg.dsp, &out)?;
            println!("{} computed, {} cached in {}", s.computed, s.cached, out.display());
        }
        Command::Train { stage, manifest, out, steps, seed, lr, init_t2m, init_ssrn } => {
            if let Some(s) = seed {
                cfg.seed = s;
                cfg.sync();
            }
            let t = &mut cfg.train;
            if let Some(m) = manifest {
                t.manifest = m;
            }
            t.out_dir = out.unwrap_or_else(|| cfg.paths.checkpoints.clone());
            if let Some(s) = steps {
                t.max_steps = s;
            }
            if lr.is_some() {
                t.lr = lr;
            }
            let output = match stage {
                StageArg::Pretrain => {
                    if init_t2m.is_some() || init_ssrn.is_some() {
                        return Err(invalid("--init-t2m and --init-ssrn apply to --stage finetune only"));
                    }
                    t.stage = Stage::Pretrain;
                    if !t.manifest.exists() {
                        return Err(invalid(format!("manifest {} not found", t.manifest.display())));
                    }
                    pretrain(t).map_err(train_err)?
                }
                StageArg::Finetune => {
                    t.stage = Stage::Finetune;
                    let init = init_t2m.ok_or_else(|| invalid("--stage finetune needs --init-t2m"))?;
                    let init = existing(init, "initial acoustic model")?;
                    let init_ssrn = init_ssrn.map(|p| existing(p, "initial SSRN")).transpose()?;
                    if !t.manifest.exists() {
                        return Err(invalid(format!("manifest {} not found", t.manifest.display())));
                    }
                    finetune(&init, init_ssrn.as_deref(), t).map_err(train_err)?
                }
            };
            println!("seed {}", output.log.seed);
            println!("acoustic model: {} (step {})", output.t2m_path.display(), output.t2m.step);
            if let Some((ck, path)) = &output.ssrn {
                println!("ssrn: {} (step {})", path.display(), ck.step);
            }
        }
        Command::TrainVocoder { manifest, out, steps, seed } => {
            let m = manifest_at(&manifest)?;
            let v = &cfg.vocoder;
            let hp = GeneratorHparams {
                channels: v.channels,
                upsample: v.upsample.clone(),
                ..GeneratorHparams::new(&cfg.dsp)
            };
            let mut pairs = Vec::new();
            for u in m.utterances.iter().take(v.max_utterances) {
                let mut w = load_wav::<f32>(m.audio_path(u), cfg.dsp.sample_rate)?;
                w.samples.truncate(v.segment_frames * cfg.dsp.hop_length);
                pairs.push(corrector_pair(&w, &cfg.dsp)?);
            }
            if pairs.is_empty() {
                return Err(invalid("manifest lists no utterances"));
            }
            let opts = ToyOptions { steps: steps.unwrap_or(v.steps), lr: v.lr, seed: seed.unwrap_or(cfg.seed) };
            let trained = train_corrector_toy(&pairs, hp, &opts)?;
            let out = out.unwrap_or_else(|| cfg.checkpoint(GENERATOR_FILE));
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let ck = generator_checkpoint(&trained.generator, Some(&trained.adam), opts.steps as u64, Vec::new());
            ck.save(&out)?;
            println!(
                "multiscale loss {:.4} -> {:.4}; generator written to {}",
                trained.initial_loss(),
                trained.final_loss(),
                out.display()
            );
        }
        Command::Synth { symbols, vocoder, out, t2m, ssrn, generator, max_frames } => {
            synth(&cfg, &symbols, vocoder, &out, t2m, ssrn, generator, max_frames)?;
        }
        Command::EvalObjective { reference, est } => {
            for p in [&reference, &est] {
                if !p.exists() {
                    return Err(invalid(format!("{} not found", p.display())));
                }
            }
            let analyzer = MelAnalyzer::<f64>::new(&cfg.dsp)?;
            let r = analyzer.linear_magnitude(&load_wav(&reference, cfg.dsp.sample_rate)?)?;
            let e = analyzer.linear_magnitude(&load_wav(&est, cfg.dsp.sample_rate)?)?;
            let report = serde_json::json!({
                "spectral_convergence": spectral_convergence(&r, &e)?,
                "log_mag_distance": log_mag_distance(&r, &e, laughtts::dsp::LOG_FLOOR)?,
                "frames": r.rows().min(e.rows()),
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::MosStats { ratings, out, format } => {
            let text = std::fs::read_to_string(&ratings).map_err(|e| invalid(format!("{}: {e}", ratings.display())))?;
            let records = read_rating_log(&text).map_err(|e| invalid(e.to_string()))?;
            let stats = mos_stats(&records)?;
            let format = match format {
                FormatArg::Csv => ExportFormat::Csv,
                FormatArg::Jsonl => ExportFormat::Jsonl,
            };
            match out {
                Some(path) => export_results(&stats, &path, format)?,
                None => print!("{}", to_csv(&stats)),
            }
            eprintln!("{} ratings over {} methods", records.len(), stats.len());
        }
        Command::MosServe { service_config, port } => {
            let mut sc = match &service_config {
                Some(p) => mos_service::ServiceConfig::from_file(p).map_err(|e| invalid(e.to_string()))?,
                None => mos_service::ServiceConfig::default(),
            };
            sc = sc.apply_env(|k| std::env::var(k).ok()).map_err(|e| invalid(e.to_string()))?;
            if let Some(p) = port {
                sc.port = p;
            }
            sc.validate().map_err(|e| invalid(e.to_string()))?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(mos_service::serve(sc))?;
        }
        Command::GradCheck { seeds, tolerance } => {
            if seeds == 0 {
                return Err(invalid("--seeds must be positive"));
            }
            let cases = gradient_suite(seeds)?;
            let mut failed = 0;
            for c in &cases {
                let ok = c.max_relative_error < tolerance;
                failed += usize::from(!ok);
                println!("{:<38} {:>10.3e}  {}", c.name, c.max_relative_error, if ok { "ok" } else { "FAIL" });
            }
            if failed > 0 {
                bail!("{failed} of {} ops exceed relative error {tolerance:e}", cases.len());
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthSidecar<'a> {
    symbols: &'a str,
    vocoder: &'a str,
    /// Decoded acoustic-model frames (before upsampling by the reduction factor).
    frames: usize,
    samples: usize,
    sample_rate: u32,
    attention_diagonality: f64,
    truncated: bool,
    stop_rule: &'a str,
}

#[allow(clippy::too_many_arguments)]
fn synth(
    cfg: &GlobalConfig,
    symbols: &str,
    vocoder: VocoderArg,
    out: &Path,
    t2m: Option<PathBuf>,
    ssrn: Option<PathBuf>,
    generator: Option<PathBuf>,
    max_frames: Option<usize>,
) -> anyhow::Result<()> {
    let table = cfg.train.symbol_table().map_err(train_err)?;
    let ids = table.encode_raw(symbols).map_err(|e| invalid(e.to_string()))?;
    let t2m_path = existing(t2m.unwrap_or_else(|| cfg.checkpoint(T2M_FILE)), "acoustic model")?;
    let ssrn_path = existing(ssrn.unwrap_or_else(|| cfg.checkpoint(SSRN_FILE)), "SSRN")?;
    let generator_path = match vocoder {
        VocoderArg::Gl => None,
        VocoderArg::Melgan => Some(existing(generator.unwrap_or_else(|| cfg.checkpoint(GENERATOR_FILE)), "generator")?),
    };
    let allow = cfg.train.allow_fingerprint_mismatch;
    let (model, _, _) = load_t2m(Checkpoint::load(&t2m_path)?, &table, &cfg.dsp, allow)?;
    let (ssrn, _, _) = load_ssrn(Checkpoint::load(&ssrn_path)?, &cfg.dsp, allow)?;

    let out_mel = synthesize_mel(&model, &ids, max_frames.unwrap_or(cfg.synth.max_frames), cfg.synth.monotonic)?;
    if out_mel.truncated() {
        log::warn!("decoding hit the frame limit before the stop rule fired");
    }
    let mag = ssrn.infer(&out_mel.mel)?;
    let gl = gl_vocode(&mag.transpose2(), &cfg.dsp, &cfg.synth.gl)?;
    let wave = match generator_path {
        None => gl.waveform,
        Some(path) => {
            let g = load_generator(Checkpoint::load(&path)?, &cfg.dsp, allow)?;
            let cc = CorrectionConfig { dsp: cfg.dsp.clone(), generator: Some(path), ..CorrectionConfig::default() };
            correct_waveform(&gl.waveform, &g, &cc)?
        }
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_wav(out, &wave)?;
    let sidecar = SynthSidecar {
        symbols,
        vocoder: match vocoder {
            VocoderArg::Gl => "gl",
            VocoderArg::Melgan => "melgan",
        },
        frames: out_mel.mel.cols(),
        samples: wave.len(),
        sample_rate: wave.sample_rate,
        attention_diagonality: out_mel.attention.diagonality(),
        truncated: out_mel.truncated(),
        stop_rule: STOP_RULE,
    };
    let side = sidecar_path(out);
    std::fs::write(&side, serde_json::to_string_pretty(&sidecar)? + "\n").with_context(|| format!("writing {}", side.display()))?;
    println!("wrote {} ({} samples, {} frames)", out.display(), wave.len(), sidecar.frames);
    Ok(())
}

pub fn sidecar_path(wav: &Path) -> PathBuf {
    let mut s = wav.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}
