//! One line per acceptance criterion; exits non-zero if any fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use laughtts::annotation::{
    corpus_stats, generate_synthetic_corpus, render_symbols, Manifest, Style, SymbolTable, SynthCorpusConfig, Utterance, VowelContext,
};
use laughtts::diagnostics::{gradient_suite, GRAD_TOLERANCE};
use laughtts::dsp::{griffin_lim, DspConfig, PhaseInit, StftPlan, Waveform};
use laughtts::eval::{mos_gain, mos_stats, ratings_from_histograms, synthesize_histogram, to_csv, Method};
use laughtts::nnet::{AdamConfig, AdamState, Tensor};
use laughtts::text2mel::{LossWeights, SsrnHparams, Text2Mel, Text2MelHparams};
use laughtts::train::{
    load_examples, overfit_single, t2m_losses, train_t2m, Example, LoopOptions, RunLog, FINETUNE_LR_RATIO, FINETUNE_STYLES, PRETRAIN_LR,
};
use laughtts::vocoder::{correct_waveform, corrector_pair, train_corrector_toy, CorrectionConfig, Generator, GeneratorHparams, ToyOptions};
use mos_service::{router, AppState, SampleSet, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64, detail: String) -> Outcome {
    ensure(elapsed.as_secs() < limit_secs, format!("{detail}; {:.1} s of {limit_secs} s", elapsed.as_secs_f64()))
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let cases = gradient_suite(20).map_err(|e| e.to_string())?;
    let worst = cases.iter().max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error)).expect("cases");
    let failed: Vec<&str> = cases.iter().filter(|c| c.max_relative_error >= GRAD_TOLERANCE).map(|c| c.name).collect();
    let detail = format!("{} ops x 20 seeds, worst {} at {:.2e}", cases.len(), worst.name, worst.max_relative_error);
    if !failed.is_empty() {
        return Err(format!("{detail}; failing: {}", failed.join(", ")));
    }
    within(t.elapsed(), 120, detail)
}

fn interior_snr(x: &[f64], y: &[f64], margin: usize) -> f64 {
    let (mut s, mut e) = (0.0, 0.0);
    for i in margin..x.len() - margin {
        s += x[i] * x[i];
        e += (x[i] - y[i]).powi(2);
    }
    10.0 * (s / e).log10()
}

fn dsp() -> Outcome {
    let t = Instant::now();
    let cfg = DspConfig::default();
    let plan = StftPlan::<f64>::new(&cfg).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut worst_snr = f64::INFINITY;
    for _ in 0..20 {
        let len = rng.random_range(4096..16384);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = plan.istft(&plan.stft(&x).map_err(|e| e.to_string())?, Some(len)).map_err(|e| e.to_string())?;
        worst_snr = worst_snr.min(interior_snr(&x, &y, cfg.n_fft));
    }
    // Consistent magnitude: taken from a real signal, a two-partial chirp.
    let sr = cfg.sample_rate as f64;
    let x: Vec<f64> = (0..22050)
        .map(|i| {
            let t = i as f64 / sr;
            0.5 * (2.0 * std::f64::consts::PI * (200.0 * t + 300.0 * t * t)).sin() + 0.2 * (2.0 * std::f64::consts::PI * 1300.0 * t).sin()
        })
        .collect();
    let mag = plan.stft(&x).map_err(|e| e.to_string())?.magnitude();
    let gl = griffin_lim(&mag, 60, &cfg, PhaseInit::Zeros).map_err(|e| e.to_string())?;
    let sc = &gl.convergence;
    let monotone = sc.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    let last = *sc.last().expect("iterations");
    let detail = format!("worst SNR {worst_snr:.1} dB over 20 signals; GL SC {:.3} -> {last:.4}, monotone {monotone}", sc[0]);
    if worst_snr <= 30.0 || !monotone || last >= 0.15 {
        return Err(detail);
    }
    within(t.elapsed(), 60, detail)
}

fn corpus(dir: &Path, seed: u64, n: usize, cfg: &SynthCorpusConfig) -> Result<Vec<Example<f32>>, String> {
    let m = generate_synthetic_corpus(seed, n, cfg, dir).map_err(|e| e.to_string())?;
    load_examples(&m, &SymbolTable::standard(), &DspConfig::default()).map_err(|e| e.to_string())
}

fn overfit() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let examples = corpus(dir.path(), 7, 4, &SynthCorpusConfig::default())?;
    let dsp = DspConfig::default();
    let table = SymbolTable::standard();
    let opts = LoopOptions { steps: 1500, lr: 1e-3, seed: 1, log_every: 100, ..LoopOptions::default() };
    let r = overfit_single(&examples[0], Text2MelHparams::new(&table, &dsp), SsrnHparams::new(&dsp), &opts).map_err(|e| e.to_string())?;
    let detail = format!("1500 steps: mel L1 {:.4}, diagonality {:.3}, SSRN L1 {:.4}", r.t2m_l1, r.diagonality, r.ssrn_l1);
    if !(r.t2m_l1 < 0.02 && r.diagonality > 0.6 && r.ssrn_l1 < 0.03) {
        return Err(detail);
    }
    within(t.elapsed(), 600, detail)
}

fn transfer() -> Outcome {
    const PRETRAIN_STEPS: u64 = 1000;
    const STEPS: u64 = 500;
    let t = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pre_cfg = SynthCorpusConfig { corpus: "pre".into(), speaker: "a".into(), ..SynthCorpusConfig::default() };
    let tgt_cfg = SynthCorpusConfig {
        corpus: "tgt".into(),
        speaker: "b".into(),
        pitch_scale: 1.2,
        styles: FINETUNE_STYLES.to_vec(),
        ..SynthCorpusConfig::default()
    };
    let pre = corpus(&dir.path().join("pre"), 7, 40, &pre_cfg)?;
    let tgt = corpus(&dir.path().join("tgt"), 8, 10, &tgt_cfg)?;
    let hp = Text2MelHparams::new(&SymbolTable::standard(), &DspConfig::default());
    let err = |e: laughtts::train::TrainError| e.to_string();

    let mut base = Text2Mel::<f32>::new(hp.clone(), &mut ChaCha8Rng::seed_from_u64(100)).map_err(|e| e.to_string())?;
    let mut adam = AdamState::new(&base.store, AdamConfig { lr: PRETRAIN_LR, ..AdamConfig::default() });
    let opts = LoopOptions { steps: PRETRAIN_STEPS, seed: 100, ..LoopOptions::default() };
    train_t2m(&mut base, &mut adam, &pre, &opts, 0, &mut RunLog::new(100), |_, _, _| Ok(())).map_err(err)?;

    let all: Vec<&Example<f32>> = tgt.iter().collect();
    let w = LossWeights::default();
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..5u64 {
        let ft_lr = PRETRAIN_LR * FINETUNE_LR_RATIO;
        let mut ft = base.clone();
        let mut ft_adam = adam.clone();
        ft_adam.config.lr = ft_lr;
        let o = LoopOptions { steps: STEPS, seed, lr: ft_lr, ..LoopOptions::default() };
        train_t2m(&mut ft, &mut ft_adam, &tgt, &o, PRETRAIN_STEPS, &mut RunLog::new(seed), |_, _, _| Ok(())).map_err(err)?;

        let mut sc = Text2Mel::<f32>::new(hp.clone(), &mut ChaCha8Rng::seed_from_u64(seed)).map_err(|e| e.to_string())?;
        let mut sc_adam = AdamState::new(&sc.store, AdamConfig { lr: PRETRAIN_LR, ..AdamConfig::default() });
        let o = LoopOptions { steps: STEPS, seed, lr: PRETRAIN_LR, ..LoopOptions::default() };
        train_t2m(&mut sc, &mut sc_adam, &tgt, &o, 0, &mut RunLog::new(seed), |_, _, _| Ok(())).map_err(err)?;

        let lf = t2m_losses(&ft, &all, &w).map_err(err)?["total"];
        let ls = t2m_losses(&sc, &all, &w).map_err(err)?["total"];
        wins += usize::from(lf <= ls);
        pairs.push(format!("{lf:.3}/{ls:.3}"));
    }
    let detail = format!("fine-tuned <= scratch in {wins}/5 seeds ({})", pairs.join(" "));
    if wins < 4 {
        return Err(detail);
    }
    within(t.elapsed(), 1800, detail)
}

fn rms(x: &[f32]) -> f64 {
    (x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

fn corrector() -> Outcome {
    let t = Instant::now();
    let dsp = DspConfig::default();
    let hop = dsp.hop_length;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let small = GeneratorHparams { channels: 8, ..GeneratorHparams::new(&dsp) };
    let g = Generator::<f32>::new(small, &mut rng).map_err(|e| e.to_string())?;
    for frames in 1..=200 {
        let mel = Tensor::from_vec(&[dsp.n_mels, frames], (0..dsp.n_mels * frames).map(|_| rng.random_range(0.0..1.0)).collect())
            .map_err(|e| e.to_string())?;
        let len = g.generate(&mel, dsp.sample_rate).map_err(|e| e.to_string())?.len();
        if len != hop * frames {
            return Err(format!("{frames} frames gave {len} samples"));
        }
    }

    let syms: Vec<String> = ["LV", "LU", "LV"].map(String::from).to_vec();
    let (w, _) = render_symbols(&syms, Style::Laugh, Some(VowelContext::A), &SynthCorpusConfig::default(), 1);
    let w32 = Waveform::new(w.samples.iter().map(|&v| v as f32).collect(), w.sample_rate).map_err(|e| e.to_string())?;
    let full = Generator::<f32>::new(GeneratorHparams::new(&dsp), &mut rng).map_err(|e| e.to_string())?;
    let out = correct_waveform(&w32, &full, &CorrectionConfig::default()).map_err(|e| e.to_string())?;
    let len_diff = out.len().abs_diff(w32.len());
    let rms_ratio = rms(&out.samples) / rms(&w32.samples);
    if len_diff > hop || (rms_ratio - 1.0).abs() > 0.05 {
        return Err(format!("corrected length off by {len_diff}, RMS ratio {rms_ratio:.4}"));
    }

    let n = w32.sample_rate as usize / 4;
    let fixture = Waveform::new(w32.samples[..n].to_vec(), w32.sample_rate).map_err(|e| e.to_string())?;
    let pair = corrector_pair(&fixture, &dsp).map_err(|e| e.to_string())?;
    let trained = train_corrector_toy(&[pair], GeneratorHparams::new(&dsp), &ToyOptions { steps: 2000, lr: 1e-3, seed: 0 })
        .map_err(|e| e.to_string())?;
    let ratio = trained.final_loss() / trained.initial_loss();
    let detail = format!(
        "lengths exact for 1..=200 frames; duration off by {len_diff}, RMS ratio {rms_ratio:.4}; toy loss {:.3} -> {:.3} (x{ratio:.2})",
        trained.initial_loss(),
        trained.final_loss()
    );
    ensure(ratio <= 0.5, format!("{detail}; {:.1} s", t.elapsed().as_secs_f64()))
}

/// Published per-method count, mean and standard deviation.
const PUBLISHED: [(Method, usize, f64, f64); 4] = [
    (Method::Hmm, 407, 2.64, 1.02),
    (Method::Seq2seqGl, 431, 2.50, 1.09),
    (Method::Seq2seqMelgan, 429, 3.28, 1.06),
    (Method::Original, 429, 4.10, 0.91),
];

fn mos() -> Outcome {
    let mut hists = Vec::new();
    for (m, n, mean, std) in PUBLISHED {
        hists.push((m, synthesize_histogram(n, mean, std).ok_or(format!("no histogram for {m}"))?));
    }
    let records = ratings_from_histograms(&hists, 24);
    let stats = mos_stats(&records).map_err(|e| e.to_string())?;
    let total: usize = stats.iter().map(|s| s.n_ratings).sum();
    let g1 = mos_gain(&stats, Method::Seq2seqMelgan, Method::Seq2seqGl).map_err(|e| e.to_string())?;
    let g2 = mos_gain(&stats, Method::Original, Method::Hmm).map_err(|e| e.to_string())?;

    let mut worst = 0.0f64;
    for st in &stats {
        let scores: Vec<f64> = records.iter().filter(|r| r.method == st.method).map(|r| r.score as f64).collect();
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        worst = worst.max((st.mos - mean).abs()).max((st.std - std).abs());
        let published = PUBLISHED.iter().find(|p| p.0 == st.method).expect("method");
        if (st.mos - published.2).abs() >= 0.005 || (st.std - published.3).abs() >= 0.005 {
            return Err(format!("{} reproduces {:.4}/{:.4}", st.method, st.mos, st.std));
        }
    }
    let csv = to_csv(&stats);
    let row_ok = csv.lines().any(|l| l.starts_with("seq2seq-melgan,429,3.28,1.06,"));
    let detail = format!("{total} ratings; gains {g1:.2} and {g2:.2}; oracle deviation {worst:.1e}; csv row {row_ok}");
    ensure(total == 1696 && g1 == 0.78 && g2 == 1.46 && worst <= 1e-12 && row_ok, detail)
}

fn corpus_table() -> Outcome {
    let mut utterances = Vec::new();
    let mut durations = HashMap::new();
    // (context, count, number of 2 s utterances; the rest last 1 s)
    for (ctx, count, long) in [(VowelContext::A, 54, 47), (VowelContext::E, 33, 30), (VowelContext::I, 25, 13)] {
        for i in 0..count {
            let id = format!("{ctx:?}-{i:03}");
            durations.insert(id.clone(), if i < long { 2.0 } else { 1.0 });
            utterances.push(Utterance {
                id,
                symbols: vec!["LV".into(), "LU".into()],
                audio_path: "unused.wav".into(),
                style: Style::Laugh,
                vowel_context: Some(ctx),
                speaker: "spk".into(),
            });
        }
    }
    for i in 0..10 {
        let id = format!("speech-{i}");
        durations.insert(id.clone(), 3.5);
        utterances.push(Utterance {
            id,
            symbols: vec!["aa".into()],
            audio_path: "unused.wav".into(),
            style: Style::Speech,
            vowel_context: None,
            speaker: "spk".into(),
        });
    }
    let m = Manifest { corpus: "table".into(), sample_rate: 22050, utterances, base_dir: Default::default() };
    let s = corpus_stats(&m, &durations).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = VowelContext::ALL.iter().map(|c| s.laughs_per_context[c]).collect();
    let secs: Vec<f64> = VowelContext::ALL.iter().map(|c| s.laugh_secs_per_context[c]).collect();
    let detail = format!("counts {counts:?} (total {}), seconds {secs:?} (total {})", s.total_laughs(), s.total_laugh_secs());
    ensure(counts == [54, 33, 25] && s.total_laughs() == 112 && secs == [101.0, 63.0, 38.0] && s.total_laugh_secs() == 202.0, detail)
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .expect("request");
    let resp = router(state.clone()).oneshot(req).await.expect("infallible");
    let status = resp.status();
    let bytes = resp.into_body().collect().await.expect("body").to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn open_service(dir: &Path) -> Result<Arc<AppState>, String> {
    let wave = Waveform::new(vec![0.1f32; 800], 16000).map_err(|e| e.to_string())?;
    let mut entries = Vec::new();
    for i in 0..8 {
        let method = Method::ALL[i % 4];
        let path = dir.join(format!("{method}_{i}.wav"));
        laughtts::dsp::save_wav(&path, &wave).map_err(|e| e.to_string())?;
        entries.push((format!("{method}_{i}"), method, path));
    }
    let samples = SampleSet::new(entries, 5).map_err(|e| e.to_string())?;
    let config = ServiceConfig { store_dir: dir.join("store"), admin_token: "acceptance".into(), server_seed: 5, ..ServiceConfig::default() };
    AppState::open(config, samples).map_err(|e| e.to_string())
}

async fn service_checks() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let state = open_service(dir.path())?;
    let mut bodies = Vec::new();
    let mut orders = Vec::new();
    for _ in 0..10 {
        let (_, v) = call(&state, "POST", "/api/session", Some(json!({"gender": "female", "age_range": "20-40"}))).await;
        let token = v["token"].as_str().ok_or("no token")?.to_string();
        let mut order = Vec::new();
        loop {
            let (_, n) = call(&state, "GET", &format!("/api/session/{token}/next"), None).await;
            bodies.push(n.clone());
            let Some(sid) = n["sample_id"].as_str().map(str::to_string) else { break };
            let uri = format!("/api/session/{token}/rating");
            let body = json!({"sample_id": sid, "score": 3});
            let (a, first) = call(&state, "POST", &uri, Some(body.clone())).await;
            let (b, again) = call(&state, "POST", &uri, Some(body)).await;
            if a != StatusCode::OK || b != StatusCode::OK || again["duplicate"] != json!(true) {
                return Err(format!("resubmission not idempotent: {first} then {again}"));
            }
            bodies.push(first);
            order.push(sid);
        }
        orders.push(order);
    }
    let acked = state.ratings();
    if acked.len() != 80 {
        return Err(format!("{} ratings stored, expected 80", acked.len()));
    }
    let mut distinct = orders.clone();
    distinct.sort();
    distinct.dedup();
    let leaks = bodies.iter().filter(|b| {
        let text = b.to_string();
        text.contains("method") || Method::ALL.iter().any(|m| text.contains(m.label()))
    });
    let leaks = leaks.count();
    drop(state);
    let reopened = open_service(dir.path())?;
    let replayed = reopened.ratings() == acked;
    let detail = format!(
        "{} distinct orders of 10 sessions; {leaks} payloads expose methods; 80 acked ratings replayed after restart: {replayed}",
        distinct.len()
    );
    ensure(distinct.len() == 10 && leaks == 0 && replayed, detail)
}

fn service() -> Outcome {
    tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(|e| e.to_string())?.block_on(service_checks())
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("gradient correctness", gradients),
        ("dsp round trip and griffin-lim", dsp),
        ("single-utterance overfit", overfit),
        ("fine-tuning transfer", transfer),
        ("corrector contracts", corrector),
        ("mos statistics", mos),
        ("corpus statistics", corpus_table),
        ("listening-test service protocol", service),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
