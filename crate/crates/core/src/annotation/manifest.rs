//! Tab-separated corpus manifests.
//!
//! ```text
//! # corpus=amused
//! # sample_rate=22050
//! id<TAB>style<TAB>vowel|-<TAB>speaker<TAB>audio_path<TAB>space separated symbols
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::symbols::{Style, SymbolKind, SymbolTable, VowelContext};
use super::AnnotationError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub symbols: Vec<String>,
    /// Relative paths resolve against the manifest directory.
    pub audio_path: String,
    pub style: Style,
    pub vowel_context: Option<VowelContext>,
    pub speaker: String,
}

impl Utterance {
    /// Structural checks that do not need a symbol table.
    pub fn validate(&self) -> Result<(), AnnotationError> {
        let bad = |message: &str| Err(AnnotationError::InvalidUtterance { id: self.id.clone(), message: message.into() });
        if self.id.is_empty() {
            return bad("empty id");
        }
        if self.symbols.is_empty() {
            return bad("empty symbol sequence");
        }
        match (self.style, self.vowel_context) {
            (Style::Laugh, None) => bad("laugh without a vowel context"),
            (Style::Laugh, Some(_)) | (_, None) => Ok(()),
            (_, Some(_)) => bad("vowel context is only allowed on laughs"),
        }
    }
}

/// Model input ids: style marker, vowel marker for laughs, symbols, `EOS`.
pub fn encode_utterance(u: &Utterance, table: &SymbolTable) -> Result<Vec<usize>, AnnotationError> {
    u.validate()?;
    let marker = |s: &str| table.id(s).ok_or_else(|| AnnotationError::UnknownSymbol { symbol: s.into(), position: 0 });
    let mut ids = vec![marker(u.style.marker())?];
    if let Some(ctx) = u.vowel_context {
        ids.push(marker(ctx.marker())?);
    }
    for (pos, sym) in u.symbols.iter().enumerate() {
        let id = table.id(sym).ok_or_else(|| AnnotationError::UnknownSymbol { symbol: sym.clone(), position: pos })?;
        let kind = table.kind(id).expect("id from table");
        let allowed = match u.style {
            Style::Laugh => kind == SymbolKind::Laugh,
            Style::SpeechLaugh => matches!(kind, SymbolKind::Laugh | SymbolKind::Phone),
            Style::Speech | Style::SmiledSpeech => kind == SymbolKind::Phone,
        };
        if !allowed {
            return Err(AnnotationError::InvalidUtterance {
                id: u.id.clone(),
                message: format!("symbol {sym:?} at position {pos} is not allowed in a {} utterance", u.style),
            });
        }
        ids.push(id);
    }
    ids.push(table.eos_id());
    Ok(ids)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub corpus: String,
    pub sample_rate: u32,
    pub utterances: Vec<Utterance>,
    /// Directory relative audio paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(corpus: impl Into<String>, sample_rate: u32) -> Self {
        Manifest { corpus: corpus.into(), sample_rate, utterances: Vec::new(), base_dir: PathBuf::new() }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    pub fn audio_path(&self, u: &Utterance) -> PathBuf {
        let p = Path::new(&u.audio_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Utterances whose style is in `styles`, order preserved.
    pub fn filter_styles(&self, styles: &[Style]) -> Manifest {
        Manifest {
            utterances: self.utterances.iter().filter(|u| styles.contains(&u.style)).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# corpus={}", self.corpus);
        let _ = writeln!(out, "# sample_rate={}", self.sample_rate);
        for u in &self.utterances {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                u.id,
                u.style,
                u.vowel_context.map_or("-", |v| v.tag()),
                u.speaker,
                u.audio_path,
                u.symbols.join(" ")
            );
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), AnnotationError> {
        std::fs::write(path, self.to_tsv()).map_err(|source| AnnotationError::Io { path: path.display().to_string(), source })
    }
}

fn manifest_err(line: usize, column: usize, message: impl Into<String>) -> AnnotationError {
    AnnotationError::Manifest { line, column, message: message.into() }
}

/// Parses manifest text. Lines are 1-based, columns are 1-based field
/// indices. A missing `sample_rate` header defaults to 22050.
pub fn parse_manifest(text: &str) -> Result<Manifest, AnnotationError> {
    let mut manifest = Manifest::new("", 22050);
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "corpus" => manifest.corpus = value.trim().to_string(),
                    "sample_rate" => {
                        manifest.sample_rate = value
                            .trim()
                            .parse()
                            .ok()
                            .filter(|&r: &u32| r > 0)
                            .ok_or_else(|| manifest_err(line, 1, format!("bad sample rate {:?}", value.trim())))?;
                    }
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<&str> = raw.trim_end_matches(['\r', '\n']).split('\t').collect();
        if fields.len() != 6 {
            return Err(manifest_err(line, fields.len().min(6) + 1, format!("expected 6 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(manifest_err(line, 1, "empty utterance id"));
        }
        let style: Style = fields[1].trim().parse().map_err(|e| manifest_err(line, 2, e))?;
        let vowel_context = match fields[2].trim() {
            "-" | "" => None,
            v => Some(v.parse::<VowelContext>().map_err(|e| manifest_err(line, 3, e))?),
        };
        let speaker = fields[3].trim();
        if speaker.is_empty() {
            return Err(manifest_err(line, 4, "empty speaker"));
        }
        let audio_path = fields[4].trim();
        if audio_path.is_empty() {
            return Err(manifest_err(line, 5, "empty audio path"));
        }
        let symbols: Vec<String> = fields[5].split_whitespace().map(String::from).collect();
        if symbols.is_empty() {
            return Err(manifest_err(line, 6, "empty symbol sequence"));
        }
        if let Some(&first) = seen.get(id) {
            return Err(AnnotationError::DuplicateId { id: id.to_string(), line, first });
        }
        seen.insert(id.to_string(), line);
        let u = Utterance {
            id: id.to_string(),
            symbols,
            audio_path: audio_path.to_string(),
            style,
            vowel_context,
            speaker: speaker.to_string(),
        };
        u.validate().map_err(|e| manifest_err(line, 3, e.to_string()))?;
        manifest.utterances.push(u);
    }
    Ok(manifest)
}

/// Reads a manifest file; relative audio paths resolve against its directory.
pub fn read_manifest(path: &Path) -> Result<Manifest, AnnotationError> {
    let text = std::fs::read_to_string(path).map_err(|source| AnnotationError::Io { path: path.display().to_string(), source })?;
    let mut m = parse_manifest(&text)?;
    m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# corpus=tiny\n# sample_rate=16000\n\
        u1\tlaugh\ta\tspk\tu1.wav\tLV LU LV\n\
        u2\tspeech\t-\tspk\tu2.wav\thh ah l ow\n\
        u3\tspeech_laugh\t-\tspk\tu3.wav\thh ah LV l ow\n";

    #[test]
    fn parses_and_round_trips() {
        let m = parse_manifest(SAMPLE).unwrap();
        assert_eq!(m.corpus, "tiny");
        assert_eq!(m.sample_rate, 16000);
        assert_eq!(m.len(), 3);
        assert_eq!(m.utterances[0].vowel_context, Some(VowelContext::A));
        assert_eq!(parse_manifest(&m.to_tsv()).unwrap(), m);
    }

    #[test]
    fn laugh_encoding_layout() {
        let t = SymbolTable::standard();
        let m = parse_manifest(SAMPLE).unwrap();
        let ids = encode_utterance(&m.utterances[0], &t).unwrap();
        let syms = t.decode(&ids).unwrap();
        assert_eq!(syms, ["STYLE_LAUGH", "CTX_A", "LV", "LU", "LV", "EOS"]);
        let ids = encode_utterance(&m.utterances[2], &t).unwrap();
        assert_eq!(t.decode(&ids).unwrap()[0], "STYLE_LAUGH");
        assert_eq!(ids.iter().filter(|&&i| i == t.eos_id()).count(), 1);
    }

    #[test]
    fn laugh_with_phone_rejected() {
        let t = SymbolTable::standard();
        let mut m = parse_manifest(SAMPLE).unwrap();
        m.utterances[0].symbols.push("aa".into());
        assert!(matches!(encode_utterance(&m.utterances[0], &t), Err(AnnotationError::InvalidUtterance { .. })));
        m.utterances[1].symbols.push("LV".into());
        assert!(encode_utterance(&m.utterances[1], &t).is_err());
    }

    #[test]
    fn unknown_symbol_reports_position() {
        let t = SymbolTable::standard();
        let mut m = parse_manifest(SAMPLE).unwrap();
        m.utterances[1].symbols[2] = "qq".into();
        match encode_utterance(&m.utterances[1], &t) {
            Err(AnnotationError::UnknownSymbol { symbol, position }) => {
                assert_eq!(symbol, "qq");
                assert_eq!(position, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_location() {
        let dup = format!("{SAMPLE}u2\tspeech\t-\tspk\tx.wav\taa\n");
        match parse_manifest(&dup) {
            Err(AnnotationError::DuplicateId { id, line, first }) => {
                assert_eq!((id.as_str(), line, first), ("u2", 6, 4));
            }
            other => panic!("{other:?}"),
        }
        let short = "u1\tlaugh\ta\tspk\n";
        assert!(matches!(parse_manifest(short), Err(AnnotationError::Manifest { line: 1, .. })));
        let bad_style = "u1\tgiggle\ta\tspk\tu.wav\tLV\n";
        assert!(matches!(parse_manifest(bad_style), Err(AnnotationError::Manifest { line: 1, column: 2, .. })));
        let no_ctx = "u1\tlaugh\t-\tspk\tu.wav\tLV\n";
        assert!(matches!(parse_manifest(no_ctx), Err(AnnotationError::Manifest { line: 1, column: 3, .. })));
        let ctx_on_speech = "u1\tspeech\te\tspk\tu.wav\taa\n";
        assert!(parse_manifest(ctx_on_speech).is_err());
    }

    #[test]
    fn filter_by_style() {
        let m = parse_manifest(SAMPLE).unwrap();
        let laughs = m.filter_styles(&[Style::Laugh, Style::SpeechLaugh]);
        assert_eq!(laughs.len(), 2);
        assert_eq!(laughs.corpus, "tiny");
    }
}
