use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::manifest::Manifest;
use super::symbols::{Style, VowelContext};
use super::AnnotationError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub utterances: usize,
    pub style_counts: BTreeMap<Style, usize>,
    pub laughs_per_context: BTreeMap<VowelContext, usize>,
    pub laugh_secs_per_context: BTreeMap<VowelContext, f64>,
    pub total_secs: f64,
}

impl CorpusStats {
    fn empty() -> Self {
        CorpusStats {
            utterances: 0,
            style_counts: Style::ALL.into_iter().map(|s| (s, 0)).collect(),
            laughs_per_context: VowelContext::ALL.into_iter().map(|v| (v, 0)).collect(),
            laugh_secs_per_context: VowelContext::ALL.into_iter().map(|v| (v, 0.0)).collect(),
            total_secs: 0.0,
        }
    }

    pub fn total_minutes(&self) -> f64 {
        self.total_secs / 60.0
    }

    pub fn total_laughs(&self) -> usize {
        self.laughs_per_context.values().sum()
    }

    pub fn total_laugh_secs(&self) -> f64 {
        self.laugh_secs_per_context.values().sum()
    }
}

/// Per-style counts and per-vowel-context laugh counts and durations.
/// `durations` maps utterance ids to seconds.
pub fn corpus_stats(m: &Manifest, durations: &HashMap<String, f64>) -> Result<CorpusStats, AnnotationError> {
    let mut stats = CorpusStats::empty();
    for u in &m.utterances {
        let secs = *durations.get(&u.id).ok_or_else(|| AnnotationError::MissingDuration(u.id.clone()))?;
        if !(secs.is_finite() && secs >= 0.0) {
            return Err(AnnotationError::InvalidUtterance { id: u.id.clone(), message: format!("duration {secs} s") });
        }
        stats.utterances += 1;
        *stats.style_counts.entry(u.style).or_default() += 1;
        stats.total_secs += secs;
        if let (Style::Laugh, Some(ctx)) = (u.style, u.vowel_context) {
            *stats.laughs_per_context.entry(ctx).or_default() += 1;
            *stats.laugh_secs_per_context.entry(ctx).or_default() += secs;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Utterance;

    fn utt(id: &str, style: Style, ctx: Option<VowelContext>) -> Utterance {
        let symbols = if style == Style::Laugh { vec!["LV".to_string()] } else { vec!["aa".to_string()] };
        Utterance { id: id.into(), symbols, audio_path: format!("{id}.wav"), style, vowel_context: ctx, speaker: "s".into() }
    }

    #[test]
    fn empty_manifest_is_all_zero() {
        let s = corpus_stats(&Manifest::new("x", 22050), &HashMap::new()).unwrap();
        assert_eq!(s.utterances, 0);
        assert_eq!(s.total_secs, 0.0);
        assert!(s.style_counts.values().all(|&c| c == 0));
        assert_eq!(s.laughs_per_context.len(), 3);
        assert_eq!(s.total_laugh_secs(), 0.0);
    }

    #[test]
    fn missing_duration_named() {
        let mut m = Manifest::new("x", 22050);
        m.utterances.push(utt("a1", Style::Laugh, Some(VowelContext::A)));
        match corpus_stats(&m, &HashMap::new()) {
            Err(AnnotationError::MissingDuration(id)) => assert_eq!(id, "a1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_styles() {
        let mut m = Manifest::new("x", 22050);
        m.utterances.push(utt("a", Style::Laugh, Some(VowelContext::E)));
        m.utterances.push(utt("b", Style::Speech, None));
        m.utterances.push(utt("c", Style::SmiledSpeech, None));
        let d: HashMap<String, f64> = [("a", 1.5), ("b", 2.0), ("c", 0.5)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let s = corpus_stats(&m, &d).unwrap();
        assert_eq!(s.utterances, 3);
        assert_eq!(s.style_counts[&Style::Laugh], 1);
        assert_eq!(s.laughs_per_context[&VowelContext::E], 1);
        assert_eq!(s.laugh_secs_per_context[&VowelContext::E], 1.5);
        assert_eq!(s.total_secs, 4.0);
        assert_eq!(s.style_counts.values().sum::<usize>(), s.utterances);
    }
}
