use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use laughtts::eval::{read_rating_log, RatingRecord};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ServiceError;

/// Append-only line-delimited JSON file. Each append is flushed and, with
/// `fsync`, synced before returning.
#[derive(Debug)]
pub struct JsonlLog {
    path: PathBuf,
    file: File,
    fsync: bool,
}

impl JsonlLog {
    /// Opens or creates the log and returns its complete lines. A torn final
    /// line from an interrupted write is cut off.
    pub fn open(path: &Path, fsync: bool) -> Result<(Self, String), ServiceError> {
        let io = |e| ServiceError::Io(path.display().to_string(), e);
        let mut text = if path.exists() { std::fs::read_to_string(path).map_err(io)? } else { String::new() };
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            log::warn!("{}: dropping torn final line", path.display());
            text.truncate(keep);
            let f = OpenOptions::new().write(true).open(path).map_err(io)?;
            f.set_len(keep as u64).map_err(io)?;
            f.sync_all().map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok((JsonlLog { path: path.to_path_buf(), file, fsync }, text))
    }

    pub fn append<S: Serialize>(&mut self, value: &S) -> Result<(), ServiceError> {
        let io = |e| ServiceError::Io(self.path.display().to_string(), e);
        let mut line = serde_json::to_string(value).map_err(|e| ServiceError::Config(e.to_string()))?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.flush().map_err(io)?;
        if self.fsync {
            self.file.sync_data().map_err(io)?;
        }
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn parse_lines<D: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<D>, ServiceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ServiceError::Corrupt(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// Ratings in append order with (participant, sample) uniqueness.
#[derive(Debug)]
pub struct RatingStore {
    log: JsonlLog,
    records: Vec<RatingRecord>,
    pairs: HashSet<(String, String)>,
}

impl RatingStore {
    pub fn open(path: &Path, fsync: bool) -> Result<Self, ServiceError> {
        let (log, text) = JsonlLog::open(path, fsync)?;
        let records = read_rating_log(&text).map_err(|e| ServiceError::Corrupt(format!("{}: {e}", path.display())))?;
        let mut pairs = HashSet::new();
        for r in &records {
            if !pairs.insert((r.participant.clone(), r.sample.clone())) {
                return Err(ServiceError::Corrupt(format!(
                    "{}: participant {} rated {} twice",
                    path.display(),
                    r.participant,
                    r.sample
                )));
            }
        }
        Ok(RatingStore { log, records, pairs })
    }

    pub fn contains(&self, participant: &str, sample: &str) -> bool {
        self.pairs.contains(&(participant.to_string(), sample.to_string()))
    }

    /// Durably appends; returns `false` without writing when the pair exists.
    pub fn append(&mut self, rec: RatingRecord) -> Result<bool, ServiceError> {
        rec.validate().map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let key = (rec.participant.clone(), rec.sample.clone());
        if self.pairs.contains(&key) {
            return Ok(false);
        }
        self.log.append(&rec)?;
        self.pairs.insert(key);
        self.records.push(rec);
        Ok(true)
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn path(&self) -> &Path {
        self.log.path()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use laughtts::eval::Method;

    fn rec(p: &str, s: &str) -> RatingRecord {
        RatingRecord {
            participant: p.into(),
            session: p.into(),
            sample: s.into(),
            method: Method::Hmm,
            score: 4,
            timestamp_ms: 1,
        }
    }

    #[test]
    fn replay_and_uniqueness() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let mut st = RatingStore::open(&path, true).unwrap();
        assert!(st.append(rec("a", "x")).unwrap());
        assert!(!st.append(rec("a", "x")).unwrap());
        assert!(st.append(rec("b", "x")).unwrap());
        drop(st);
        let st = RatingStore::open(&path, true).unwrap();
        assert_eq!(st.records(), &[rec("a", "x"), rec("b", "x")]);
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let line = serde_json::to_string(&rec("a", "x")).unwrap();
        std::fs::write(&path, format!("{line}\n{{\"parti")).unwrap();
        let mut st = RatingStore::open(&path, false).unwrap();
        assert_eq!(st.len(), 1);
        st.append(rec("a", "y")).unwrap();
        drop(st);
        assert_eq!(RatingStore::open(&path, false).unwrap().len(), 2);
    }
}
