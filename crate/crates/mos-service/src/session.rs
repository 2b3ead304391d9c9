use laughtts::eval::{AgeRange, Gender, ParticipantInfo};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Persisted form of a session. The token itself is never written; its
/// hash identifies the session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRecord {
    pub token_hash: String,
    pub gender: Gender,
    pub age_range: AgeRange,
    pub created_ms: u64,
}

impl SessionRecord {
    /// Participant and session id stored with ratings.
    pub fn participant_id(&self) -> String {
        self.token_hash[..16].to_string()
    }

    pub fn participant_info(&self) -> ParticipantInfo {
        ParticipantInfo { participant: self.participant_id(), gender: self.gender, age_range: self.age_range }
    }
}

/// Presentation order for a session: a shuffle of `0..n` seeded by
/// `sha256(token_hash || server_seed)`, cut to `cap` items.
pub fn session_permutation(token_hash: &str, server_seed: u64, n: usize, cap: Option<usize>) -> Vec<usize> {
    let mut h = Sha256::new();
    h.update(token_hash.as_bytes());
    h.update(server_seed.to_le_bytes());
    let seed: [u8; 32] = h.finalize().into();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::from_seed(seed));
    order.truncate(cap.unwrap_or(n).min(n));
    order
}

#[derive(Clone, Debug)]
pub struct Session {
    pub record: SessionRecord,
    pub order: Vec<usize>,
    pub cursor: usize,
}

impl Session {
    pub fn current(&self) -> Option<usize> {
        self.order.get(self.cursor).copied()
    }
}
