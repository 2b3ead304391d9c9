//! Symbol alphabet, corpus manifests, corpus statistics and a deterministic
//! synthetic laughter/speech corpus.

mod manifest;
mod stats;
mod symbols;
mod synth;

pub use manifest::{encode_utterance, parse_manifest, read_manifest, Manifest, Utterance};
pub use stats::{corpus_stats, CorpusStats};
pub use symbols::{
    build_symbol_table, parse_inventory, Style, SymbolKind, SymbolTable, VowelContext, CTX_A, CTX_E, CTX_I,
    DEFAULT_PHONES, EOS, LAUGH_UNVOICED, LAUGH_VOICED, PAD, STYLE_LAUGH, STYLE_SMILE, STYLE_SPEECH,
};
pub use synth::{generate_synthetic_corpus, render_symbols, SynthCorpusConfig, SynthSegment, MANIFEST_FILE};

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("duplicate symbol {0:?} in inventory")]
    DuplicateSymbol(String),
    #[error("invalid symbol {0:?}")]
    InvalidSymbol(String),
    #[error("phone and laugh inventories must be non-empty")]
    EmptyInventory,
    #[error("unknown symbol {symbol:?} at position {position}")]
    UnknownSymbol { symbol: String, position: usize },
    #[error("empty symbol sequence {0:?}")]
    EmptySymbols(String),
    #[error("manifest line {line}, column {column}: {message}")]
    Manifest { line: usize, column: usize, message: String },
    #[error("duplicate utterance id {id:?} on line {line} (first seen on line {first})")]
    DuplicateId { id: String, line: usize, first: usize },
    #[error("utterance {id}: {message}")]
    InvalidUtterance { id: String, message: String },
    #[error("no duration for utterance {0:?}")]
    MissingDuration(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
}
