use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    /// Other or unspecified.
    Other,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Female, Gender::Male, Gender::Other];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeRange {
    /// 20 to 39.
    #[serde(rename = "20-40")]
    From20To40,
    /// 50 to 64.
    #[serde(rename = "50-65")]
    From50To65,
    #[serde(rename = "other")]
    Other,
}

impl AgeRange {
    pub const ALL: [AgeRange; 3] = [AgeRange::From20To40, AgeRange::From50To65, AgeRange::Other];

    pub fn label(self) -> &'static str {
        match self {
            AgeRange::From20To40 => "[20,40[",
            AgeRange::From50To65 => "[50,65[",
            AgeRange::Other => "other",
        }
    }
}

impl fmt::Display for AgeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown gender {s:?}"))
    }
}

impl FromStr for AgeRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown age range {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantInfo {
    pub participant: String,
    pub gender: Gender,
    pub age_range: AgeRange,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderCounts {
    pub female: usize,
    pub male: usize,
    pub other: usize,
    pub sum: usize,
}

impl GenderCounts {
    fn add(&mut self, g: Gender) {
        match g {
            Gender::Female => self.female += 1,
            Gender::Male => self.male += 1,
            Gender::Other => self.other += 1,
        }
        self.sum += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRow {
    pub age_range: AgeRange,
    #[serde(flatten)]
    pub counts: GenderCounts,
}

/// Participants by age range (rows) and gender (columns) with a sum column
/// and a sum row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantTable {
    pub rows: Vec<ParticipantRow>,
    pub total: GenderCounts,
}

/// Each participant id is counted once, with its first metadata entry.
pub fn participant_table(participants: &[ParticipantInfo]) -> ParticipantTable {
    let mut seen = std::collections::HashSet::new();
    let mut rows: Vec<ParticipantRow> =
        AgeRange::ALL.iter().map(|&age_range| ParticipantRow { age_range, counts: GenderCounts::default() }).collect();
    let mut total = GenderCounts::default();
    for p in participants {
        if !seen.insert(p.participant.as_str()) {
            continue;
        }
        let row = AgeRange::ALL.iter().position(|&a| a == p.age_range).expect("all ranges listed");
        rows[row].counts.add(p.gender);
        total.add(p.gender);
    }
    ParticipantTable { rows, total }
}
