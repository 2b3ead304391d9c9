use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AnnotationError;

pub const PAD: &str = "PAD";
pub const EOS: &str = "EOS";
pub const LAUGH_VOICED: &str = "LV";
pub const LAUGH_UNVOICED: &str = "LU";
pub const CTX_A: &str = "CTX_A";
pub const CTX_E: &str = "CTX_E";
pub const CTX_I: &str = "CTX_I";
pub const STYLE_SPEECH: &str = "STYLE_SPEECH";
pub const STYLE_LAUGH: &str = "STYLE_LAUGH";
pub const STYLE_SMILE: &str = "STYLE_SMILE";

const VOWEL_MARKERS: [&str; 3] = [CTX_A, CTX_E, CTX_I];
const STYLE_MARKERS: [&str; 3] = [STYLE_SPEECH, STYLE_LAUGH, STYLE_SMILE];

/// The shipped 39-phone general-American inventory.
pub const DEFAULT_PHONES: &str = include_str!("../../data/phones.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Speech,
    SmiledSpeech,
    Laugh,
    SpeechLaugh,
}

impl Style {
    pub const ALL: [Style; 4] = [Style::Speech, Style::SmiledSpeech, Style::Laugh, Style::SpeechLaugh];

    pub fn tag(self) -> &'static str {
        match self {
            Style::Speech => "speech",
            Style::SmiledSpeech => "smiled_speech",
            Style::Laugh => "laugh",
            Style::SpeechLaugh => "speech_laugh",
        }
    }

    /// Prefix token announcing the style to the acoustic model. Speech-laughs
    /// share the laugh marker; only pure laughs carry a vowel context.
    pub fn marker(self) -> &'static str {
        match self {
            Style::Speech => STYLE_SPEECH,
            Style::SmiledSpeech => STYLE_SMILE,
            Style::Laugh | Style::SpeechLaugh => STYLE_LAUGH,
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Style::ALL.into_iter().find(|st| st.tag() == s).ok_or_else(|| format!("unknown style tag {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VowelContext {
    A,
    E,
    I,
}

impl VowelContext {
    pub const ALL: [VowelContext; 3] = [VowelContext::A, VowelContext::E, VowelContext::I];

    pub fn tag(self) -> &'static str {
        match self {
            VowelContext::A => "a",
            VowelContext::E => "e",
            VowelContext::I => "i",
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            VowelContext::A => CTX_A,
            VowelContext::E => CTX_E,
            VowelContext::I => CTX_I,
        }
    }
}

impl fmt::Display for VowelContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for VowelContext {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VowelContext::ALL.into_iter().find(|v| v.tag() == s).ok_or_else(|| format!("unknown vowel context {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Reserved,
    Phone,
    Laugh,
    VowelMarker,
    StyleMarker,
}

/// Bijective symbol/id mapping with `PAD = 0` and `EOS = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTable {
    symbols: Vec<String>,
    kinds: Vec<SymbolKind>,
    index: HashMap<String, usize>,
}

/// Table layout: `[PAD, EOS] + phones + laughs + vowel markers + style markers`.
pub fn build_symbol_table<S: AsRef<str>>(phones: &[S], laughs: &[S]) -> Result<SymbolTable, AnnotationError> {
    if phones.is_empty() || laughs.is_empty() {
        return Err(AnnotationError::EmptyInventory);
    }
    let mut table = SymbolTable { symbols: Vec::new(), kinds: Vec::new(), index: HashMap::new() };
    let groups: [(SymbolKind, Vec<&str>); 5] = [
        (SymbolKind::Reserved, vec![PAD, EOS]),
        (SymbolKind::Phone, phones.iter().map(|s| s.as_ref()).collect()),
        (SymbolKind::Laugh, laughs.iter().map(|s| s.as_ref()).collect()),
        (SymbolKind::VowelMarker, VOWEL_MARKERS.to_vec()),
        (SymbolKind::StyleMarker, STYLE_MARKERS.to_vec()),
    ];
    for (kind, syms) in groups {
        for s in syms {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(AnnotationError::InvalidSymbol(s.to_string()));
            }
            if table.index.contains_key(s) {
                return Err(AnnotationError::DuplicateSymbol(s.to_string()));
            }
            table.index.insert(s.to_string(), table.symbols.len());
            table.symbols.push(s.to_string());
            table.kinds.push(kind);
        }
    }
    Ok(table)
}

/// Reads a symbol inventory: one symbol per line, blank lines ignored.
pub fn parse_inventory(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

impl SymbolTable {
    /// Shipped phone inventory plus the voiced/unvoiced laugh labels.
    pub fn standard() -> Self {
        build_symbol_table(&parse_inventory(DEFAULT_PHONES), &[LAUGH_VOICED.to_string(), LAUGH_UNVOICED.to_string()])
            .expect("shipped inventory is valid")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn kind(&self, id: usize) -> Option<SymbolKind> {
        self.kinds.get(id).copied()
    }

    pub fn pad_id(&self) -> usize {
        0
    }

    pub fn eos_id(&self) -> usize {
        1
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Ids of a symbol kind in table order.
    pub fn ids_of(&self, kind: SymbolKind) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.kinds[i] == kind).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>, AnnotationError> {
        ids.iter()
            .enumerate()
            .map(|(pos, &id)| {
                self.symbol(id).map(String::from).ok_or(AnnotationError::UnknownSymbol { symbol: id.to_string(), position: pos })
            })
            .collect()
    }

    /// Maps a raw symbol string (markers allowed) to ids, appending `EOS`
    /// when missing.
    pub fn encode_raw(&self, text: &str) -> Result<Vec<usize>, AnnotationError> {
        let mut ids = Vec::new();
        for (pos, sym) in text.split_whitespace().enumerate() {
            let id = self.id(sym).ok_or_else(|| AnnotationError::UnknownSymbol { symbol: sym.to_string(), position: pos })?;
            if id == self.pad_id() {
                return Err(AnnotationError::InvalidSymbol(format!("{PAD} at position {pos}")));
            }
            ids.push(id);
        }
        if ids.is_empty() {
            return Err(AnnotationError::EmptySymbols(text.to_string()));
        }
        if ids.last() != Some(&self.eos_id()) {
            ids.push(self.eos_id());
        }
        if ids[..ids.len() - 1].contains(&self.eos_id()) {
            return Err(AnnotationError::InvalidSymbol(format!("{EOS} before the end of {text:?}")));
        }
        Ok(ids)
    }

    /// Short hash of the ordered symbol list.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.symbols.join("\n").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Inventory file text, one symbol per line.
    pub fn to_inventory(&self) -> String {
        let mut s = self.symbols.join("\n");
        s.push('\n');
        s
    }
}
