use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{sha256_hex, Checkpoint, ModelKind, ProvenanceEntry};
use super::data::{check_finetune_styles, load_examples, Example, Stage};
use super::runlog::{LogRecord, RunLog};
use super::step::{ssrn_losses, ssrn_step, t2m_losses, t2m_step};
use super::TrainError;
use crate::annotation::{build_symbol_table, parse_inventory, read_manifest, SymbolTable, LAUGH_UNVOICED, LAUGH_VOICED};
use crate::dsp::DspConfig;
use crate::nnet::{AdamConfig, AdamState};
use crate::text2mel::{shift_right, LossWeights, Ssrn, SsrnHparams, Text2Mel, Text2MelHparams};

pub const PRETRAIN_LR: f64 = 2e-4;
/// Fine-tuning learning rate relative to pretraining.
pub const FINETUNE_LR_RATIO: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrDecay {
    pub every: u64,
    pub factor: f64,
}

/// Inner-loop settings shared by every driver.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopOptions {
    pub steps: u64,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: f64,
    pub lr_decay: Option<LrDecay>,
    pub loss_weights: LossWeights,
    pub log_every: u64,
    /// Record teacher-forced attention diagonality at every logged step.
    pub log_diagonality: bool,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions {
            steps: 1000,
            batch_size: 8,
            seed: 0,
            lr: PRETRAIN_LR,
            lr_decay: None,
            loss_weights: LossWeights::default(),
            log_every: 10,
            log_diagonality: false,
        }
    }
}

impl LoopOptions {
    fn lr_at(&self, step: u64) -> f64 {
        match self.lr_decay {
            Some(d) if d.every > 0 => self.lr * d.factor.powi((step / d.every) as i32),
            _ => self.lr,
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::InvalidConfig(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

/// Deterministic batch sequence: each epoch is a seeded shuffle of the corpus.
pub struct BatchSchedule {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
}

impl BatchSchedule {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        BatchSchedule { rng: ChaCha8Rng::seed_from_u64(seed), order: (0..n).collect(), pos: n, batch_size }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        batch
    }
}

fn diagonality(model: &Text2Mel<f32>, ex: &Example<f32>) -> Result<f64, TrainError> {
    let (_, att) = model.infer(&ex.ids, &shift_right(&ex.mel))?;
    Ok(att.diagonality())
}

/// Trains the acoustic model for `opts.steps` updates starting at global
/// step `start`. A record is logged at `start`, every `log_every` steps and
/// after the final update. `on_step` runs after each update with the new
/// global step.
pub fn train_t2m(
    model: &mut Text2Mel<f32>,
    adam: &mut AdamState<f32>,
    examples: &[Example<f32>],
    opts: &LoopOptions,
    start: u64,
    log: &mut RunLog,
    mut on_step: impl FnMut(u64, &Text2Mel<f32>, &AdamState<f32>) -> Result<(), TrainError>,
) -> Result<(), TrainError> {
    opts.validate()?;
    if examples.is_empty() {
        return Err(TrainError::InvalidConfig("no training examples".into()));
    }
    let clock = Instant::now();
    let mut schedule = BatchSchedule::new(examples.len(), opts.batch_size, opts.seed);
    let record = |log: &mut RunLog, step: u64, losses, model: &Text2Mel<f32>| -> Result<(), TrainError> {
        let diag = if opts.log_diagonality { Some(diagonality(model, &examples[0])?) } else { None };
        log.push(LogRecord { step, model: ModelKind::T2m, losses, diagonality: diag, elapsed_secs: clock.elapsed().as_secs_f64() })
    };
    for k in 0..opts.steps {
        let step = start + k;
        let batch: Vec<&Example<f32>> = schedule.next_batch().into_iter().map(|i| &examples[i]).collect();
        adam.config.lr = opts.lr_at(step);
        let losses = t2m_step(model, adam, &batch, &opts.loss_weights)?;
        if k % opts.log_every.max(1) == 0 {
            record(log, step, losses, model)?;
        }
        on_step(step + 1, model, adam)?;
    }
    if opts.steps == 0 || !opts.steps.is_multiple_of(opts.log_every.max(1)) {
        let all: Vec<&Example<f32>> = examples.iter().take(opts.batch_size).collect();
        let losses = t2m_losses(model, &all, &opts.loss_weights)?;
        record(log, start + opts.steps, losses, model)?;
    }
    Ok(())
}

/// SSRN counterpart of [`train_t2m`].
pub fn train_ssrn(
    model: &mut Ssrn<f32>,
    adam: &mut AdamState<f32>,
    examples: &[Example<f32>],
    opts: &LoopOptions,
    start: u64,
    log: &mut RunLog,
    mut on_step: impl FnMut(u64, &Ssrn<f32>, &AdamState<f32>) -> Result<(), TrainError>,
) -> Result<(), TrainError> {
    opts.validate()?;
    if examples.is_empty() {
        return Err(TrainError::InvalidConfig("no training examples".into()));
    }
    let clock = Instant::now();
    let mut schedule = BatchSchedule::new(examples.len(), opts.batch_size, opts.seed ^ 0x55aa);
    let record = |log: &mut RunLog, step: u64, losses| {
        log.push(LogRecord { step, model: ModelKind::Ssrn, losses, diagonality: None, elapsed_secs: clock.elapsed().as_secs_f64() })
    };
    for k in 0..opts.steps {
        let step = start + k;
        let batch: Vec<&Example<f32>> = schedule.next_batch().into_iter().map(|i| &examples[i]).collect();
        adam.config.lr = opts.lr_at(step);
        let losses = ssrn_step(model, adam, &batch)?;
        if k % opts.log_every.max(1) == 0 {
            record(log, step, losses)?;
        }
        on_step(step + 1, model, adam)?;
    }
    if opts.steps == 0 || !opts.steps.is_multiple_of(opts.log_every.max(1)) {
        let all: Vec<&Example<f32>> = examples.iter().take(opts.batch_size).collect();
        record(log, start + opts.steps, ssrn_losses(model, &all)?)?;
    }
    Ok(())
}

/// Result of the single-utterance overfit harness.
#[derive(Clone, Debug, PartialEq)]
pub struct OverfitReport {
    pub log: RunLog,
    /// Teacher-forced mel L1 after training.
    pub t2m_l1: f64,
    /// Teacher-forced attention diagonality after training.
    pub diagonality: f64,
    /// Magnitude L1 of the super-resolution network after training.
    pub ssrn_l1: f64,
}

/// Trains a fresh acoustic model, then a fresh SSRN, on one example.
pub fn overfit_single(
    example: &Example<f32>,
    t2m_hparams: Text2MelHparams,
    ssrn_hparams: SsrnHparams,
    opts: &LoopOptions,
) -> Result<OverfitReport, TrainError> {
    let examples = std::slice::from_ref(example);
    let mut log = RunLog::new(opts.seed);
    let mut t2m = Text2Mel::new(t2m_hparams, &mut ChaCha8Rng::seed_from_u64(opts.seed))?;
    let mut adam = AdamState::new(&t2m.store, AdamConfig { lr: opts.lr, ..Default::default() });
    let opts = LoopOptions { batch_size: 1, log_diagonality: true, ..opts.clone() };
    train_t2m(&mut t2m, &mut adam, examples, &opts, 0, &mut log, |_, _, _| Ok(()))?;
    let mut ssrn = Ssrn::new(ssrn_hparams, &mut ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1)))?;
    let mut adam = AdamState::new(&ssrn.store, AdamConfig { lr: opts.lr, ..Default::default() });
    train_ssrn(&mut ssrn, &mut adam, examples, &opts, 0, &mut log, |_, _, _| Ok(()))?;
    let t2m_l1 = t2m_losses(&t2m, &[example], &opts.loss_weights)?["l1"];
    let ssrn_l1 = ssrn_losses(&ssrn, &[example])?["l1"];
    Ok(OverfitReport { t2m_l1, diagonality: diagonality(&t2m, example)?, ssrn_l1, log })
}

/// File-level configuration of a training stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub stage: Stage,
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// Optional phone inventory file; the shipped inventory otherwise.
    pub phones: Option<PathBuf>,
    pub batch_size: usize,
    /// Defaults to the pretraining rate, or 0.2 times it when fine-tuning.
    pub lr: Option<f64>,
    pub lr_decay: Option<LrDecay>,
    pub max_steps: u64,
    /// SSRN updates; defaults to `max_steps`.
    pub ssrn_steps: Option<u64>,
    pub seed: u64,
    pub loss_weights: LossWeights,
    /// Intermediate checkpoints every this many steps (0 disables).
    pub checkpoint_every: u64,
    pub log_every: u64,
    pub embed_dim: usize,
    pub hidden: usize,
    pub ssrn_channels: usize,
    pub freeze_ssrn: bool,
    pub allow_fingerprint_mismatch: bool,
    pub dsp: DspConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage: Stage::Pretrain,
            manifest: PathBuf::from("manifest.tsv"),
            out_dir: PathBuf::from("run"),
            phones: None,
            batch_size: 8,
            lr: None,
            lr_decay: None,
            max_steps: 1000,
            ssrn_steps: None,
            seed: 0,
            loss_weights: LossWeights::default(),
            checkpoint_every: 0,
            log_every: 10,
            embed_dim: 64,
            hidden: 64,
            ssrn_channels: 64,
            freeze_ssrn: false,
            allow_fingerprint_mismatch: false,
            dsp: DspConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.max_steps == 0 {
            return Err(TrainError::InvalidConfig("max_steps must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive".into()));
        }
        self.dsp.validate()?;
        Ok(())
    }

    pub fn effective_lr(&self) -> f64 {
        self.lr.unwrap_or(match self.stage {
            Stage::Pretrain => PRETRAIN_LR,
            Stage::Finetune => PRETRAIN_LR * FINETUNE_LR_RATIO,
        })
    }

    /// Short hash of the configuration, recorded in checkpoint provenance.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serialises"))[..16].to_string()
    }

    pub fn symbol_table(&self) -> Result<SymbolTable, TrainError> {
        match &self.phones {
            None => Ok(SymbolTable::standard()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| TrainError::Io(p.display().to_string(), e))?;
                Ok(build_symbol_table(&parse_inventory(&text), &[LAUGH_VOICED.to_string(), LAUGH_UNVOICED.to_string()])?)
            }
        }
    }

    fn loop_options(&self, steps: u64) -> LoopOptions {
        LoopOptions {
            steps,
            batch_size: self.batch_size,
            seed: self.seed,
            lr: self.effective_lr(),
            lr_decay: self.lr_decay,
            loss_weights: self.loss_weights,
            log_every: self.log_every,
            log_diagonality: false,
        }
    }
}

/// Checkpoints and log written by one stage.
#[derive(Clone, Debug)]
pub struct StageOutput {
    pub t2m: Checkpoint,
    pub t2m_path: PathBuf,
    pub ssrn: Option<(Checkpoint, PathBuf)>,
    pub log: RunLog,
}

pub const T2M_FILE: &str = "t2m.ckpt";
pub const SSRN_FILE: &str = "ssrn.ckpt";
pub const RUN_LOG_FILE: &str = "run.jsonl";

struct StageContext {
    table: SymbolTable,
    examples: Vec<Example<f32>>,
    out_dir: PathBuf,
}

fn prepare_stage(cfg: &TrainConfig) -> Result<StageContext, TrainError> {
    cfg.validate()?;
    let table = cfg.symbol_table()?;
    let manifest = read_manifest(&cfg.manifest)?;
    if manifest.is_empty() {
        return Err(TrainError::InvalidConfig(format!("{} lists no utterances", cfg.manifest.display())));
    }
    if manifest.sample_rate != cfg.dsp.sample_rate {
        log::info!("resampling corpus from {} Hz to {} Hz", manifest.sample_rate, cfg.dsp.sample_rate);
    }
    if cfg.stage == Stage::Finetune {
        check_finetune_styles(&manifest)?;
    }
    let examples = load_examples(&manifest, &table, &cfg.dsp)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| TrainError::Io(cfg.out_dir.display().to_string(), e))?;
    Ok(StageContext { table, examples, out_dir: cfg.out_dir.clone() })
}

fn t2m_checkpoint(model: &Text2Mel<f32>, adam: &AdamState<f32>, step: u64, provenance: Vec<ProvenanceEntry>) -> Checkpoint {
    Checkpoint::from_store(
        ModelKind::T2m,
        &model.store,
        Some(adam),
        serde_json::to_value(&model.hparams).expect("hparams serialise"),
        Some(model.hparams.symbol_fingerprint.clone()),
        model.hparams.dsp_fingerprint.clone(),
        step,
        provenance,
    )
}

fn ssrn_checkpoint(model: &Ssrn<f32>, adam: &AdamState<f32>, step: u64, provenance: Vec<ProvenanceEntry>) -> Checkpoint {
    Checkpoint::from_store(
        ModelKind::Ssrn,
        &model.store,
        Some(adam),
        serde_json::to_value(&model.hparams).expect("hparams serialise"),
        None,
        model.hparams.dsp_fingerprint.clone(),
        step,
        provenance,
    )
}

/// A restored model, its optimizer state when stored, and the checkpoint.
pub type Loaded<M> = (M, Option<AdamState<f32>>, Checkpoint);

/// Rebuilds an acoustic model (and its optimizer state, when stored) from
/// a checkpoint after checking kind and fingerprints.
pub fn load_t2m(
    mut ck: Checkpoint,
    table: &SymbolTable,
    dsp: &DspConfig,
    allow_mismatch: bool,
) -> Result<Loaded<Text2Mel<f32>>, TrainError> {
    ck.expect_kind(ModelKind::T2m)?;
    ck.check_fingerprints(Some(&table.fingerprint()), &dsp.fingerprint(), allow_mismatch)?;
    let mut hparams: Text2MelHparams =
        serde_json::from_value(ck.hparams.clone()).map_err(|e| TrainError::InvalidConfig(format!("checkpoint hyperparameters: {e}")))?;
    hparams.symbol_fingerprint = table.fingerprint();
    hparams.dsp_fingerprint = dsp.fingerprint();
    let mut model = Text2Mel::new(hparams, &mut ChaCha8Rng::seed_from_u64(0))?;
    let mut adam = ck.optimizer.as_ref().map(|o| AdamState::new(&model.store, o.config));
    ck.restore(&mut model.store, adam.as_mut())?;
    Ok((model, adam, ck))
}

pub fn load_ssrn(
    mut ck: Checkpoint,
    dsp: &DspConfig,
    allow_mismatch: bool,
) -> Result<Loaded<Ssrn<f32>>, TrainError> {
    ck.expect_kind(ModelKind::Ssrn)?;
    ck.check_fingerprints(None, &dsp.fingerprint(), allow_mismatch)?;
    let mut hparams: SsrnHparams =
        serde_json::from_value(ck.hparams.clone()).map_err(|e| TrainError::InvalidConfig(format!("checkpoint hyperparameters: {e}")))?;
    hparams.dsp_fingerprint = dsp.fingerprint();
    let mut model = Ssrn::new(hparams, &mut ChaCha8Rng::seed_from_u64(0))?;
    let mut adam = ck.optimizer.as_ref().map(|o| AdamState::new(&model.store, o.config));
    ck.restore(&mut model.store, adam.as_mut())?;
    Ok((model, adam, ck))
}

fn save(ck: &Checkpoint, path: &Path) -> Result<(), TrainError> {
    ck.save(path)?;
    Ok(())
}

/// Runs the t2m and SSRN loops of one stage, writing checkpoints and the log.
#[allow(clippy::too_many_arguments)]
fn run_stage(
    cfg: &TrainConfig,
    ctx: &StageContext,
    mut t2m: Text2Mel<f32>,
    mut t2m_adam: AdamState<f32>,
    t2m_start: u64,
    t2m_prov: Vec<ProvenanceEntry>,
    ssrn: Option<(Ssrn<f32>, AdamState<f32>, u64, Vec<ProvenanceEntry>)>,
) -> Result<StageOutput, TrainError> {
    let mut log = RunLog::new(cfg.seed);
    let every = cfg.checkpoint_every;
    let dir = &ctx.out_dir;
    let opts = cfg.loop_options(cfg.max_steps);
    train_t2m(&mut t2m, &mut t2m_adam, &ctx.examples, &opts, t2m_start, &mut log, |step, m, a| {
        if every > 0 && step % every == 0 {
            save(&t2m_checkpoint(m, a, step, t2m_prov.clone()), &dir.join(format!("t2m-step{step}.ckpt")))?;
        }
        Ok(())
    })?;
    let t2m_ck = t2m_checkpoint(&t2m, &t2m_adam, t2m_start + cfg.max_steps, t2m_prov.clone());
    let t2m_path = dir.join(T2M_FILE);
    save(&t2m_ck, &t2m_path)?;

    let ssrn_out = match ssrn {
        None => None,
        Some((mut model, mut adam, start, prov)) => {
            let steps = cfg.ssrn_steps.unwrap_or(cfg.max_steps);
            let opts = cfg.loop_options(steps);
            train_ssrn(&mut model, &mut adam, &ctx.examples, &opts, start, &mut log, |step, m, a| {
                if every > 0 && step % every == 0 {
                    save(&ssrn_checkpoint(m, a, step, prov.clone()), &dir.join(format!("ssrn-step{step}.ckpt")))?;
                }
                Ok(())
            })?;
            let ck = ssrn_checkpoint(&model, &adam, start + steps, prov);
            let path = dir.join(SSRN_FILE);
            save(&ck, &path)?;
            Some((ck, path))
        }
    };
    log.write_jsonl(&dir.join(RUN_LOG_FILE))?;
    Ok(StageOutput { t2m: t2m_ck, t2m_path, ssrn: ssrn_out, log })
}

/// Trains a fresh acoustic model and SSRN on the configured corpus.
pub fn pretrain(cfg: &TrainConfig) -> Result<StageOutput, TrainError> {
    if cfg.stage != Stage::Pretrain {
        return Err(TrainError::InvalidConfig("pretrain needs stage = \"pretrain\"".into()));
    }
    let ctx = prepare_stage(cfg)?;
    let mut hp = Text2MelHparams::new(&ctx.table, &cfg.dsp);
    hp.embed_dim = cfg.embed_dim;
    hp.hidden = cfg.hidden;
    let t2m = Text2Mel::new(hp, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let t2m_adam = AdamState::new(&t2m.store, AdamConfig { lr: cfg.effective_lr(), ..Default::default() });
    let prov = vec![ProvenanceEntry { stage: "pretrain".into(), parent: None, config_hash: cfg.hash() }];
    let mut sp = SsrnHparams::new(&cfg.dsp);
    sp.channels = cfg.ssrn_channels;
    let ssrn = Ssrn::new(sp, &mut ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)))?;
    let ssrn_adam = AdamState::new(&ssrn.store, AdamConfig { lr: cfg.effective_lr(), ..Default::default() });
    run_stage(cfg, &ctx, t2m, t2m_adam, 0, prov.clone(), Some((ssrn, ssrn_adam, 0, prov)))
}

fn extend(prov: &[ProvenanceEntry], parent: &[u8], cfg: &TrainConfig) -> Vec<ProvenanceEntry> {
    let mut p = prov.to_vec();
    p.push(ProvenanceEntry { stage: "finetune".into(), parent: Some(sha256_hex(parent)), config_hash: cfg.hash() });
    p
}

/// Continues training pretrained checkpoints on a target corpus restricted
/// to laughter and smiled speech. The SSRN is fine-tuned too unless
/// `freeze_ssrn` is set or no SSRN checkpoint is given.
pub fn finetune(init_t2m: &Path, init_ssrn: Option<&Path>, cfg: &TrainConfig) -> Result<StageOutput, TrainError> {
    if cfg.stage != Stage::Finetune {
        return Err(TrainError::InvalidConfig("finetune needs stage = \"finetune\"".into()));
    }
    let ctx = prepare_stage(cfg)?;
    let read = |p: &Path| std::fs::read(p).map_err(|e| TrainError::Io(p.display().to_string(), e));
    let t2m_bytes = read(init_t2m)?;
    let (t2m, adam, ck) = load_t2m(Checkpoint::decode(&t2m_bytes)?, &ctx.table, &cfg.dsp, cfg.allow_fingerprint_mismatch)?;
    if t2m.hparams.hidden != cfg.hidden || t2m.hparams.embed_dim != cfg.embed_dim {
        return Err(TrainError::InvalidConfig(format!(
            "checkpoint widths (embed {}, hidden {}) differ from the configuration (embed {}, hidden {})",
            t2m.hparams.embed_dim, t2m.hparams.hidden, cfg.embed_dim, cfg.hidden
        )));
    }
    let lr = cfg.effective_lr();
    let mut t2m_adam = adam.unwrap_or_else(|| AdamState::new(&t2m.store, AdamConfig::default()));
    t2m_adam.config.lr = lr;
    let t2m_prov = extend(&ck.provenance, &t2m_bytes, cfg);
    let ssrn = match (init_ssrn, cfg.freeze_ssrn) {
        (Some(path), false) => {
            let bytes = read(path)?;
            let (model, adam, ck) = load_ssrn(Checkpoint::decode(&bytes)?, &cfg.dsp, cfg.allow_fingerprint_mismatch)?;
            let mut adam = adam.unwrap_or_else(|| AdamState::new(&model.store, AdamConfig::default()));
            adam.config.lr = lr;
            let prov = extend(&ck.provenance, &bytes, cfg);
            Some((model, adam, ck.step, prov))
        }
        _ => None,
    };
    run_stage(cfg, &ctx, t2m, t2m_adam, ck.step, t2m_prov, ssrn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_covers_each_epoch() {
        let mut s = BatchSchedule::new(10, 4, 3);
        let mut seen: Vec<usize> = (0..3).flat_map(|_| s.next_batch()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        let mut a = BatchSchedule::new(10, 4, 3);
        let mut b = BatchSchedule::new(10, 4, 3);
        for _ in 0..20 {
            assert_eq!(a.next_batch(), b.next_batch());
        }
    }

    #[test]
    fn lr_decay_steps() {
        let o = LoopOptions { lr: 1.0, lr_decay: Some(LrDecay { every: 10, factor: 0.5 }), ..Default::default() };
        assert_eq!(o.lr_at(9), 1.0);
        assert_eq!(o.lr_at(10), 0.5);
        assert_eq!(o.lr_at(25), 0.25);
    }

    #[test]
    fn finetune_lr_is_a_fifth() {
        let cfg = TrainConfig { stage: Stage::Finetune, ..Default::default() };
        assert!((cfg.effective_lr() - 4e-5).abs() < 1e-18);
    }
}
