use std::collections::HashMap;
use std::path::{Path, PathBuf};

use laughtts::eval::Method;
use sha2::{Digest, Sha256};

use crate::ServiceError;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Identifier from the manifest, stored with each rating.
    pub id: String,
    /// Opaque identifier shown to participants.
    pub public_id: String,
    pub method: Method,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    by_public: HashMap<String, usize>,
}

fn public_id(server_seed: u64, id: &str) -> String {
    let mut h = Sha256::new();
    h.update(server_seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

impl SampleSet {
    pub fn new(entries: Vec<(String, Method, PathBuf)>, server_seed: u64) -> Result<Self, ServiceError> {
        if entries.is_empty() {
            return Err(ServiceError::Config("sample set is empty".into()));
        }
        let mut samples = Vec::with_capacity(entries.len());
        let mut by_public = HashMap::new();
        for (id, method, path) in entries {
            let public_id = public_id(server_seed, &id);
            if by_public.insert(public_id.clone(), samples.len()).is_some() {
                return Err(ServiceError::Config(format!("duplicate sample id {id:?}")));
            }
            samples.push(Sample { id, public_id, method, path });
        }
        Ok(SampleSet { samples, by_public })
    }

    /// Reads `sample_id<TAB>method<TAB>path`; relative paths resolve against
    /// the manifest directory. `#` starts a comment line.
    pub fn from_manifest(path: &Path, server_seed: u64) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Io(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| ServiceError::Config(format!("{}:{}: {m}", path.display(), i + 1));
            let cols: Vec<&str> = line.split('\t').collect();
            let [id, method, wav] = cols[..] else {
                return Err(err(format!("expected 3 tab-separated columns, found {}", cols.len())));
            };
            let method: Method = method.parse().map_err(err)?;
            entries.push((id.to_string(), method, base.join(wav)));
        }
        Self::new(entries, server_seed)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn by_public_id(&self, public_id: &str) -> Option<&Sample> {
        self.by_public.get(public_id).map(|&i| &self.samples[i])
    }
}
