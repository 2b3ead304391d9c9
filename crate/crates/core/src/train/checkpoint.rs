//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"LTTSCKPT"  magic
//! u32          format version
//! u32          header length in bytes
//! [u8]         JSON header: kind, fingerprints, step, hyperparameters,
//!              provenance, optimizer settings and the tensor directory
//!              (name, shape, offset and length in values)
//! [f32]        payload
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::nnet::{AdamConfig, AdamState, NnetError, ParamStore, Tensor};
use crate::real::Real;

pub const MAGIC: &[u8; 8] = b"LTTSCKPT";
pub const FORMAT_VERSION: u32 = 1;

const M_PREFIX: &str = "adam.m/";
const V_PREFIX: &str = "adam.v/";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptLength(String),
    #[error("corrupt checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint holds a {found} model, expected {expected}")]
    Kind { found: ModelKind, expected: ModelKind },
    #[error("{what} fingerprint mismatch: checkpoint {checkpoint}, current {current}")]
    Fingerprint { what: &'static str, checkpoint: String, current: String },
    #[error(transparent)]
    Nnet(#[from] NnetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    T2m,
    Ssrn,
    Generator,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::T2m => "t2m",
            ModelKind::Ssrn => "ssrn",
            ModelKind::Generator => "generator",
        })
    }
}

/// One training stage in a checkpoint's history.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub stage: String,
    /// SHA-256 of the checkpoint file this stage started from.
    pub parent: Option<String>,
    /// Short hash of the stage's training configuration.
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<(String, Tensor<f32>)>,
    pub v: Vec<(String, Tensor<f32>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub symbol_fingerprint: Option<String>,
    pub dsp_fingerprint: String,
    pub step: u64,
    pub hparams: serde_json::Value,
    pub provenance: Vec<ProvenanceEntry>,
    pub tensors: Vec<(String, Tensor<f32>)>,
    pub optimizer: Option<OptimizerState>,
}

#[derive(Serialize, Deserialize)]
struct DirEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: ModelKind,
    symbol_fingerprint: Option<String>,
    dsp_fingerprint: String,
    step: u64,
    hparams: serde_json::Value,
    provenance: Vec<ProvenanceEntry>,
    optimizer: Option<(AdamConfig, u64)>,
    tensors: Vec<DirEntry>,
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn named<T: Real>(store: &ParamStore<T>, values: impl Fn(usize) -> Tensor<f32>) -> Vec<(String, Tensor<f32>)> {
    store.iter().map(|(id, p)| (p.name.clone(), values(id.index()))).collect()
}

impl Checkpoint {
    /// Snapshot of a parameter store (cast to 32 bits) and optional optimizer.
    pub fn from_store<T: Real>(
        kind: ModelKind,
        store: &ParamStore<T>,
        adam: Option<&AdamState<T>>,
        hparams: serde_json::Value,
        symbol_fingerprint: Option<String>,
        dsp_fingerprint: String,
        step: u64,
        provenance: Vec<ProvenanceEntry>,
    ) -> Self {
        let params: Vec<_> = store.iter().map(|(_, p)| p.value.cast::<f32>()).collect();
        let optimizer = adam.map(|a| OptimizerState {
            config: a.config,
            step: a.step,
            m: named(store, |i| a.m[i].cast()),
            v: named(store, |i| a.v[i].cast()),
        });
        Checkpoint {
            kind,
            symbol_fingerprint,
            dsp_fingerprint,
            step,
            hparams,
            provenance,
            tensors: named(store, |i| params[i].clone()),
            optimizer,
        }
    }

    pub fn expect_kind(&self, expected: ModelKind) -> Result<(), CheckpointError> {
        if self.kind != expected {
            return Err(CheckpointError::Kind { found: self.kind, expected });
        }
        Ok(())
    }

    /// Compares fingerprints. With `allow_mismatch`, a mismatch is logged,
    /// the optimizer state dropped and loading continues.
    pub fn check_fingerprints(
        &mut self,
        symbol: Option<&str>,
        dsp: &str,
        allow_mismatch: bool,
    ) -> Result<(), CheckpointError> {
        let mut mismatches = Vec::new();
        if let (Some(cur), Some(ck)) = (symbol, self.symbol_fingerprint.as_deref()) {
            if cur != ck {
                mismatches.push(("symbol table", ck.to_string(), cur.to_string()));
            }
        }
        if dsp != self.dsp_fingerprint {
            mismatches.push(("dsp config", self.dsp_fingerprint.clone(), dsp.to_string()));
        }
        let Some((what, checkpoint, current)) = mismatches.into_iter().next() else { return Ok(()) };
        if !allow_mismatch {
            return Err(CheckpointError::Fingerprint { what, checkpoint, current });
        }
        log::warn!("{what} fingerprint mismatch (checkpoint {checkpoint}, current {current}); optimizer state cleared");
        self.optimizer = None;
        Ok(())
    }

    /// Loads parameters (and optimizer moments, when both are present) into
    /// an already-constructed model.
    pub fn restore<T: Real>(&self, store: &mut ParamStore<T>, adam: Option<&mut AdamState<T>>) -> Result<(), CheckpointError> {
        let cast = |v: &[(String, Tensor<f32>)]| v.iter().map(|(n, t)| (n.clone(), t.cast::<T>())).collect::<Vec<_>>();
        store.load_values(&cast(&self.tensors))?;
        if let (Some(adam), Some(opt)) = (adam, &self.optimizer) {
            let mut moments = Vec::with_capacity(store.len());
            for (which, list) in [("m", &opt.m), ("v", &opt.v)] {
                let by_name: std::collections::HashMap<&str, &Tensor<f32>> = list.iter().map(|(n, t)| (n.as_str(), t)).collect();
                let mut out = Vec::with_capacity(store.len());
                for (_, p) in store.iter() {
                    let t = by_name
                        .get(p.name.as_str())
                        .ok_or_else(|| CheckpointError::Header(format!("optimizer {which} missing {}", p.name)))?;
                    if t.shape() != p.value.shape() {
                        return Err(CheckpointError::Header(format!("optimizer {which} shape mismatch for {}", p.name)));
                    }
                    out.push(t.cast::<T>());
                }
                moments.push(out);
            }
            adam.v = moments.pop().expect("two moment lists");
            adam.m = moments.pop().expect("two moment lists");
            adam.step = opt.step;
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut directory = Vec::new();
        let mut payload: Vec<f32> = Vec::new();
        let mut push = |name: String, t: &Tensor<f32>| {
            directory.push(DirEntry { name, shape: t.shape().to_vec(), offset: payload.len(), len: t.len() });
            payload.extend_from_slice(t.data());
        };
        for (n, t) in &self.tensors {
            push(n.clone(), t);
        }
        if let Some(opt) = &self.optimizer {
            for (n, t) in &opt.m {
                push(format!("{M_PREFIX}{n}"), t);
            }
            for (n, t) in &opt.v {
                push(format!("{V_PREFIX}{n}"), t);
            }
        }
        let header = Header {
            kind: self.kind,
            symbol_fingerprint: self.symbol_fingerprint.clone(),
            dsp_fingerprint: self.dsp_fingerprint.clone(),
            step: self.step,
            hparams: self.hparams.clone(),
            provenance: self.provenance.clone(),
            optimizer: self.optimizer.as_ref().map(|o| (o.config, o.step)),
            tensors: directory,
        };
        let header = serde_json::to_vec(&header).expect("header serialises");
        let mut out = Vec::with_capacity(16 + header.len() + 4 * payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let short = |what: &str| CheckpointError::CorruptLength(format!("file ends inside the {what}"));
        if bytes.len() < 8 {
            return Err(short("magic"));
        }
        if &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let word = |at: usize| -> Result<u32, CheckpointError> {
            let b = bytes.get(at..at + 4).ok_or_else(|| short("preamble"))?;
            Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
        };
        let version = word(8)?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version { found: version, expected: FORMAT_VERSION });
        }
        let header_len = word(12)? as usize;
        let header_bytes = bytes.get(16..16 + header_len).ok_or_else(|| short("header"))?;
        let header: Header = serde_json::from_slice(header_bytes).map_err(|e| CheckpointError::Header(e.to_string()))?;
        let payload = &bytes[16 + header_len..];
        if !payload.len().is_multiple_of(4) {
            return Err(CheckpointError::CorruptLength(format!("payload of {} bytes is not whole 32-bit values", payload.len())));
        }
        let values = payload.len() / 4;
        let expected: usize = header.tensors.iter().map(|d| d.len).sum();
        if values != expected {
            return Err(CheckpointError::CorruptLength(format!("payload holds {values} values, directory lists {expected}")));
        }
        let mut tensors = Vec::new();
        let mut m = Vec::new();
        let mut v = Vec::new();
        for d in header.tensors {
            if d.offset + d.len > values || d.shape.iter().product::<usize>() != d.len {
                return Err(CheckpointError::CorruptLength(format!("tensor {} out of bounds", d.name)));
            }
            let data = payload[4 * d.offset..4 * (d.offset + d.len)]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let t = Tensor::from_vec(&d.shape, data)?;
            if let Some(n) = d.name.strip_prefix(M_PREFIX) {
                m.push((n.to_string(), t));
            } else if let Some(n) = d.name.strip_prefix(V_PREFIX) {
                v.push((n.to_string(), t));
            } else {
                tensors.push((d.name, t));
            }
        }
        let optimizer = header.optimizer.map(|(config, step)| OptimizerState { config, step, m, v });
        Ok(Checkpoint {
            kind: header.kind,
            symbol_fingerprint: header.symbol_fingerprint,
            dsp_fingerprint: header.dsp_fingerprint,
            step: header.step,
            hparams: header.hparams,
            provenance: header.provenance,
            tensors,
            optimizer,
        })
    }

    /// Writes atomically (temporary file, then rename) and returns the
    /// SHA-256 of the written bytes.
    pub fn save(&self, path: &Path) -> Result<String, CheckpointError> {
        let bytes = self.encode();
        let io = |source| CheckpointError::Io { path: path.display().to_string(), source };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &bytes).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)?;
        Ok(sha256_hex(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::decode(&bytes)
    }

    /// True when the last provenance entry names `parent_bytes` as its origin.
    pub fn descends_from(&self, parent_bytes: &[u8]) -> bool {
        self.provenance.last().and_then(|p| p.parent.as_deref()) == Some(sha256_hex(parent_bytes).as_str())
    }
}
