use laughtts::annotation::{generate_synthetic_corpus, Style, SymbolTable, SynthCorpusConfig, MANIFEST_FILE};
use laughtts::dsp::{DspConfig, StftPlan};
use laughtts::text2mel::synthesize_mel;
use laughtts::train::{finetune, load_ssrn, load_t2m, pretrain, sha256_hex, Checkpoint, Stage, TrainConfig, TrainError, FINETUNE_STYLES};
use laughtts::vocoder::{gl_vocode, GlConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn small_dsp() -> DspConfig {
    DspConfig { sample_rate: 8000, n_fft: 256, win_length: 256, hop_length: 64, n_mels: 20, fmax: 4000.0, ..DspConfig::default() }
}

fn small_train(dir: &std::path::Path, stage: Stage, out: &str) -> TrainConfig {
    TrainConfig {
        stage,
        manifest: dir.join(MANIFEST_FILE),
        out_dir: dir.join(out),
        batch_size: 2,
        max_steps: 4,
        log_every: 2,
        embed_dim: 16,
        hidden: 16,
        ssrn_channels: 16,
        seed: 3,
        dsp: small_dsp(),
        ..TrainConfig::default()
    }
}

fn corpus(dir: &std::path::Path, seed: u64, styles: &[Style]) {
    let cfg = SynthCorpusConfig { sample_rate: 8000, styles: styles.to_vec(), ..SynthCorpusConfig::default() };
    generate_synthetic_corpus(seed, 4, &cfg, dir).unwrap();
}

#[test]
fn pretrain_finetune_and_synthesize() {
    let pre = tempfile::tempdir().unwrap();
    let tgt = tempfile::tempdir().unwrap();
    corpus(pre.path(), 1, &Style::ALL);
    corpus(tgt.path(), 2, &FINETUNE_STYLES);

    let cfg = small_train(pre.path(), Stage::Pretrain, "run");
    let a = pretrain(&cfg).unwrap();
    let b = pretrain(&small_train(pre.path(), Stage::Pretrain, "again")).unwrap();
    assert_eq!(a.log, b.log, "same seed, same losses");
    assert_eq!(a.t2m.tensors, b.t2m.tensors);
    assert_eq!(a.t2m.provenance.len(), 1);
    assert_eq!(a.t2m.provenance[0].parent, None);

    let ft_cfg = small_train(tgt.path(), Stage::Finetune, "ft");
    let (ssrn_ck, ssrn_path) = a.ssrn.clone().unwrap();
    let ft = finetune(&a.t2m_path, Some(&ssrn_path), &ft_cfg).unwrap();
    let parent = sha256_hex(&std::fs::read(&a.t2m_path).unwrap());
    assert_eq!(ft.t2m.provenance.len(), 2);
    assert_eq!(ft.t2m.provenance[1].parent.as_deref(), Some(parent.as_str()));
    assert!(ft.t2m.step > a.t2m.step);

    let table = SymbolTable::standard();
    let dsp = small_dsp();
    let (model, _, _) = load_t2m(Checkpoint::load(&ft.t2m_path).unwrap(), &table, &dsp, false).unwrap();
    let (ssrn, _, _) = load_ssrn(ssrn_ck, &dsp, false).unwrap();
    let ids = table.encode_raw("STYLE_LAUGH CTX_E LV LU LV").unwrap();
    let out = synthesize_mel(&model, &ids, 10, true).unwrap();
    let mag = ssrn.infer(&out.mel).unwrap();
    assert_eq!(mag.cols(), out.mel.cols() * dsp.reduction_factor);
    let wave = gl_vocode(&mag.transpose2(), &dsp, &GlConfig { n_iters: 4, ..GlConfig::default() }).unwrap().waveform;
    // Non-centred frames: the last one ends n_fft samples after its start.
    assert_eq!(wave.len(), (mag.cols() - 1) * dsp.hop_length + dsp.n_fft);
    assert!(wave.samples.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
}

#[test]
fn finetune_rejects_plain_speech() {
    let pre = tempfile::tempdir().unwrap();
    corpus(pre.path(), 4, &[Style::Speech]);
    let a = pretrain(&small_train(pre.path(), Stage::Pretrain, "run")).unwrap();
    let err = finetune(&a.t2m_path, None, &small_train(pre.path(), Stage::Finetune, "ft")).unwrap_err();
    assert!(matches!(err, TrainError::StyleNotAllowed { .. }), "{err}");
}

fn interior_snr(x: &[f64], y: &[f64], margin: usize) -> f64 {
    let (mut s, mut e) = (0.0, 0.0);
    for i in margin..x.len() - margin {
        s += x[i] * x[i];
        e += (x[i] - y[i]).powi(2);
    }
    10.0 * (s / e).log10()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stft_round_trip_keeps_interior(seed in 0u64..10_000, len in 1024usize..6000, center in any::<bool>()) {
        let cfg = DspConfig { center, ..small_dsp() };
        let plan = StftPlan::<f64>::new(&cfg).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = plan.istft(&plan.stft(&x).unwrap(), Some(len)).unwrap();
        prop_assert_eq!(y.len(), len);
        prop_assert!(interior_snr(&x, &y, cfg.n_fft) > 30.0);
    }
}
