//! Training: data preparation, optimisation steps, checkpoints, run logs and
//! the pretrain / fine-tune / overfit drivers.

mod checkpoint;
mod data;
mod driver;
mod runlog;
mod step;

pub use checkpoint::{sha256_hex, Checkpoint, CheckpointError, ModelKind, OptimizerState, ProvenanceEntry, FORMAT_VERSION, MAGIC};
pub use data::{check_finetune_styles, load_examples, prepare_example, Example, Stage, FINETUNE_STYLES};
pub use driver::{
    finetune, load_ssrn, load_t2m, overfit_single, pretrain, train_ssrn, train_t2m, BatchSchedule, Loaded, LoopOptions, LrDecay,
    OverfitReport, StageOutput, TrainConfig, FINETUNE_LR_RATIO, PRETRAIN_LR, RUN_LOG_FILE, SSRN_FILE, T2M_FILE,
};
pub use runlog::{LogRecord, RunLog};
pub use step::{ssrn_losses, ssrn_step, t2m_losses, t2m_step, LossValues};

use crate::annotation::{AnnotationError, Style};
use crate::dsp::DspError;
use crate::nnet::NnetError;
use crate::text2mel::Text2MelError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Model(#[from] Text2MelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("non-finite {0} loss")]
    NonFiniteLoss(String),
    #[error("utterance {id} has style {style}, which fine-tuning does not accept")]
    StyleNotAllowed { id: String, style: Style },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}
