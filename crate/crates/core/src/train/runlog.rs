use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checkpoint::ModelKind;
use super::step::LossValues;
use super::TrainError;

/// One logged training step. Equality ignores the wall-clock field so runs
/// can be compared for determinism.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub model: ModelKind,
    pub losses: LossValues,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonality: Option<f64>,
    pub elapsed_secs: f64,
}

impl PartialEq for LogRecord {
    fn eq(&self, other: &Self) -> bool {
        self.step == other.step && self.model == other.model && self.losses == other.losses && self.diagonality == other.diagonality
    }
}

/// Append-only training log; step numbers increase per model.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub records: Vec<LogRecord>,
}

impl RunLog {
    pub fn new(seed: u64) -> Self {
        RunLog { seed, records: Vec::new() }
    }

    pub fn push(&mut self, record: LogRecord) -> Result<(), TrainError> {
        if let Some(last) = self.records.iter().rev().find(|r| r.model == record.model) {
            if record.step <= last.step {
                return Err(TrainError::InvalidConfig(format!(
                    "run log steps must increase ({} model: {} after {})",
                    record.model, record.step, last.step
                )));
            }
        }
        if let Some((name, _)) = record.losses.iter().find(|(_, v)| !v.is_finite()) {
            return Err(TrainError::NonFiniteLoss(name.clone()));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn last(&self, model: ModelKind) -> Option<&LogRecord> {
        self.records.iter().rev().find(|r| r.model == model)
    }

    pub fn at(&self, model: ModelKind, step: u64) -> Option<&LogRecord> {
        self.records.iter().find(|r| r.model == model && r.step == step)
    }

    /// A `{"seed": ..}` header line, then one JSON object per record.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::json!({ "seed": self.seed }).to_string() + "\n";
        for r in &self.records {
            out += &(serde_json::to_string(r).expect("record serialises") + "\n");
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, TrainError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Header {
            seed: u64,
        }
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let header: Header = match lines.next() {
            Some((_, l)) => serde_json::from_str(l).map_err(|e| TrainError::InvalidConfig(format!("run log header: {e}")))?,
            None => return Err(TrainError::InvalidConfig("empty run log".into())),
        };
        let mut log = RunLog::new(header.seed);
        for (i, line) in lines {
            let rec: LogRecord = serde_json::from_str(line)
                .map_err(|e| TrainError::InvalidConfig(format!("run log line {}: {e}", i + 1)))?;
            log.push(rec)?;
        }
        Ok(log)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), TrainError> {
        let mut f = std::fs::File::create(path).map_err(|e| TrainError::Io(path.display().to_string(), e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| TrainError::Io(path.display().to_string(), e))
    }
}
