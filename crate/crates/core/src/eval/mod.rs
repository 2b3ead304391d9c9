//! Listening-test statistics, result export and objective spectral metrics.

mod export;
mod fixtures;
mod participants;
mod spectral;
mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use export::{export_results, parse_csv, parse_jsonl, to_csv, to_jsonl, ExportFormat, ExportRow, CSV_HEADER};
pub use fixtures::{ratings_from_histograms, synthesize_histogram};
pub use participants::{participant_table, AgeRange, Gender, GenderCounts, ParticipantInfo, ParticipantRow, ParticipantTable};
pub use spectral::{log_mag_distance, spectral_convergence};
pub use stats::{
    boxplot_summary, mos_gain, mos_stats, quantile, score_distribution, BoxplotSummary, MethodStats, QUARTILE_METHOD, STD_KIND,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no ratings for method {0}")]
    MissingMethod(Method),
    #[error("no ratings")]
    Empty,
    #[error("invalid rating: {0}")]
    InvalidRecord(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("reference spectrogram has zero norm")]
    ZeroReference,
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Systems compared in the listening test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "original")]
    Original,
    #[serde(rename = "hmm")]
    Hmm,
    #[serde(rename = "seq2seq-gl")]
    Seq2seqGl,
    #[serde(rename = "seq2seq-melgan")]
    Seq2seqMelgan,
}

impl Method {
    /// Reporting order.
    pub const ALL: [Method; 4] = [Method::Hmm, Method::Seq2seqGl, Method::Seq2seqMelgan, Method::Original];

    pub fn label(self) -> &'static str {
        match self {
            Method::Original => "original",
            Method::Hmm => "hmm",
            Method::Seq2seqGl => "seq2seq-gl",
            Method::Seq2seqMelgan => "seq2seq-melgan",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.label() == s).ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// One naturalness rating as stored by the listening-test service, one JSON
/// object per line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingRecord {
    pub participant: String,
    pub session: String,
    pub sample: String,
    pub method: Method,
    pub score: u8,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

impl RatingRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(1..=5).contains(&self.score) {
            return Err(EvalError::InvalidRecord(format!("score {} outside 1..=5", self.score)));
        }
        if self.participant.is_empty() || self.sample.is_empty() {
            return Err(EvalError::InvalidRecord("empty participant or sample id".into()));
        }
        Ok(())
    }
}

/// Reads a rating store (one [`RatingRecord`] per line). Blank lines are
/// skipped; a torn final line (no trailing newline) is ignored.
pub fn read_rating_log(text: &str) -> Result<Vec<RatingRecord>, EvalError> {
    let complete = if text.ends_with('\n') || text.is_empty() { text } else { &text[..text.rfind('\n').map_or(0, |i| i + 1)] };
    let mut out = Vec::new();
    for (i, line) in complete.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RatingRecord =
            serde_json::from_str(line).map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() })?;
        rec.validate().map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}
