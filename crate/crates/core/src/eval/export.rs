use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, Method, MethodStats};

pub const CSV_HEADER: &str = "method,n_ratings,mos,std,median,q1,q3,p1,p2,p3,p4,p5";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "jsonl" => Ok(ExportFormat::Jsonl),
            _ => Err(format!("unknown export format {s:?} (expected csv or jsonl)")),
        }
    }
}

/// One exported line. Field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportRow {
    pub method: Method,
    pub n_ratings: usize,
    pub mos: f64,
    pub std: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub p5: f64,
}

fn round2(x: f64) -> f64 {
    format!("{x:.2}").parse().expect("formatted float parses")
}

impl ExportRow {
    /// The values as they appear in CSV (two decimals).
    pub fn rounded(&self) -> ExportRow {
        ExportRow {
            method: self.method,
            n_ratings: self.n_ratings,
            mos: round2(self.mos),
            std: round2(self.std),
            median: round2(self.median),
            q1: round2(self.q1),
            q3: round2(self.q3),
            p1: round2(self.p1),
            p2: round2(self.p2),
            p3: round2(self.p3),
            p4: round2(self.p4),
            p5: round2(self.p5),
        }
    }

    fn values(&self) -> [f64; 10] {
        [self.mos, self.std, self.median, self.q1, self.q3, self.p1, self.p2, self.p3, self.p4, self.p5]
    }
}

impl From<&MethodStats> for ExportRow {
    fn from(s: &MethodStats) -> Self {
        let [p1, p2, p3, p4, p5] = s.percentages;
        ExportRow {
            method: s.method,
            n_ratings: s.n_ratings,
            mos: s.mos,
            std: s.std,
            median: s.median,
            q1: s.q1,
            q3: s.q3,
            p1,
            p2,
            p3,
            p4,
            p5,
        }
    }
}

pub fn to_csv(stats: &[MethodStats]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for s in stats {
        let row = ExportRow::from(s);
        write!(out, "{},{}", row.method, row.n_ratings).expect("write to string");
        for v in row.values() {
            write!(out, ",{v:.2}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

pub fn to_jsonl(stats: &[MethodStats]) -> String {
    stats.iter().map(|s| serde_json::to_string(&ExportRow::from(s)).expect("row serialises") + "\n").collect()
}

pub fn parse_csv(text: &str) -> Result<Vec<ExportRow>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(EvalError::Parse { line: 1, message: format!("expected header {CSV_HEADER:?}") }),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Parse { line: i + 1, message };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 12 {
            return Err(err(format!("expected 12 columns, found {}", cols.len())));
        }
        let method: Method = cols[0].parse().map_err(err)?;
        let n_ratings = cols[1].parse().map_err(|e| err(format!("n_ratings: {e}")))?;
        let mut v = [0.0; 10];
        for (k, c) in cols[2..].iter().enumerate() {
            v[k] = c.parse().map_err(|e| err(format!("column {}: {e}", k + 3)))?;
        }
        let [mos, std, median, q1, q3, p1, p2, p3, p4, p5] = v;
        out.push(ExportRow { method, n_ratings, mos, std, median, q1, q3, p1, p2, p3, p4, p5 });
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<ExportRow>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

pub fn export_results(stats: &[MethodStats], path: &Path, format: ExportFormat) -> Result<(), EvalError> {
    let text = match format {
        ExportFormat::Csv => to_csv(stats),
        ExportFormat::Jsonl => to_jsonl(stats),
    };
    std::fs::write(path, text).map_err(|e| EvalError::Io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{mos_stats, RatingRecord};
    use rand::{Rng, SeedableRng};

    fn random_stats(seed: u64) -> Vec<MethodStats> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let recs: Vec<RatingRecord> = (0..300)
            .map(|i| RatingRecord {
                participant: format!("p{i}"),
                session: "s".into(),
                sample: "x".into(),
                method: Method::ALL[rng.random_range(0..4)],
                score: rng.random_range(1..=5),
                timestamp_ms: 0,
            })
            .collect();
        mos_stats(&recs).unwrap()
    }

    #[test]
    fn empty_stats_give_header_only() {
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&to_csv(&[])).unwrap().is_empty());
        assert_eq!(to_jsonl(&[]), "");
    }

    #[test]
    fn round_trips() {
        for seed in 0..5 {
            let stats = random_stats(seed);
            let rows: Vec<ExportRow> = stats.iter().map(ExportRow::from).collect();
            assert_eq!(parse_jsonl(&to_jsonl(&stats)).unwrap(), rows);
            let rounded: Vec<ExportRow> = rows.iter().map(ExportRow::rounded).collect();
            assert_eq!(parse_csv(&to_csv(&stats)).unwrap(), rounded);
        }
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let stats = random_stats(9);
        let p = dir.path().join("r.csv");
        export_results(&stats, &p, ExportFormat::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), to_csv(&stats));
        assert!(export_results(&stats, &dir.path().join("missing/r.csv"), ExportFormat::Jsonl).is_err());
    }

    #[test]
    fn malformed_csv() {
        assert!(parse_csv("nope\n").is_err());
        assert!(matches!(parse_csv(&format!("{CSV_HEADER}\nhmm,1,2\n")), Err(EvalError::Parse { line: 2, .. })));
        assert!(parse_csv(&format!("{CSV_HEADER}\nvits,1,2,3,4,5,6,7,8,9,10,11\n")).is_err());
    }
}
