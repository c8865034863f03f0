//! Answer extraction: demarcating a likely answer span inside a passage.
//!
//! The [`Reader`] trait is the extension point for span-extraction models.
//! [`ReferenceReader`] is a deterministic lexical stand-in. It scores every
//! token window of up to `max_window` tokens inside each sentence and keeps
//! the best one, with ties going to the earliest (then shortest) window.
//!
//! A window's score is the product of three factors:
//!
//! - support: F1 between the question's content words and the content words
//!   of the sentence left outside the window, so the sentence must talk
//!   about what was asked;
//! - answer F1: precision is the share of the window's content words that
//!   the question does not mention, recall is the share of the sentence's
//!   unmentioned content words that the window covers;
//! - proximity: `1 / (1 + g)` where `g` counts content words between the
//!   window and the nearest question word outside it.
//!
//! Windows begin and end on content words. A requirement identifier opening
//! a sentence (`DR-13`) is never part of an answer. When no window scores
//! above zero the reader falls back to the window with the highest plain
//! overlap F1 against the question, and failing that to the first window
//! with score 0.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::lexicon;
use crate::plugin::{JsonPlugin, PluginError, PluginSpec};
use crate::textseg::{split_sentences, Passage};

#[derive(Debug, thiserror::Error)]
pub enum ReaderError {
    #[error("passage {passage_id} is empty")]
    EmptyPassage { passage_id: String },
    #[error("passage {passage_id} has {tokens} tokens, reader `{reader}` accepts at most {capacity}")]
    PassageTooLong {
        passage_id: String,
        reader: String,
        tokens: usize,
        capacity: usize,
    },
    #[error("reader `{reader}` returned span [{start}, {end}) outside passage {passage_id} of length {len}")]
    InvalidSpan {
        reader: String,
        passage_id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("reader failed: {0}")]
    Component(#[from] PluginError),
}

/// Raw reader output in character offsets of the passage text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub passage_id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub score: f64,
}

pub trait Reader: Send + Sync {
    fn name(&self) -> &str;
    /// Longest passage, in tokens, the reader accepts. `None` is unbounded.
    fn max_tokens(&self) -> Option<usize> {
        None
    }
    /// `Ok(None)` means the reader abstains.
    fn extract(&self, question: &str, passage_text: &str) -> Result<Option<SpanPrediction>, PluginError>;
    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// Runs `reader` on one passage and validates its span.
pub fn extract_answer(reader: &dyn Reader, question: &str, passage: &Passage) -> Result<Option<AnswerSpan>, ReaderError> {
    if passage.text.trim().is_empty() {
        return Err(ReaderError::EmptyPassage {
            passage_id: passage.id.clone(),
        });
    }
    if let Some(capacity) = reader.max_tokens() {
        if passage.token_count > capacity {
            return Err(ReaderError::PassageTooLong {
                passage_id: passage.id.clone(),
                reader: reader.name().to_string(),
                tokens: passage.token_count,
                capacity,
            });
        }
    }
    let Some(pred) = reader.extract(question, &passage.text)? else {
        return Ok(None);
    };
    let len = passage.text.chars().count();
    if pred.start >= pred.end || pred.end > len {
        return Err(ReaderError::InvalidSpan {
            reader: reader.name().to_string(),
            passage_id: passage.id.clone(),
            start: pred.start,
            end: pred.end,
            len,
        });
    }
    let text: String = passage.text.chars().skip(pred.start).take(pred.end - pred.start).collect();
    Ok(Some(AnswerSpan {
        passage_id: passage.id.clone(),
        start: pred.start,
        end: pred.end,
        text,
        score: if pred.score.is_finite() { pred.score.clamp(0.0, 1.0) } else { 0.0 },
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceReader {
    pub max_window: usize,
}

impl Default for ReferenceReader {
    fn default() -> Self {
        Self { max_window: 12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Punct,
    /// requirement identifier at sentence start
    Ident,
    Stop,
    Asked,
    Novel,
}

impl Class {
    fn is_content(self) -> bool {
        matches!(self, Class::Asked | Class::Novel)
    }
}

struct SentenceView {
    /// char offsets in the passage
    spans: Vec<(usize, usize)>,
    terms: Vec<String>,
    classes: Vec<Class>,
}

/// Number of leading tokens forming an identifier such as `DR-13` or
/// `SCIR-20.1`, or 0.
pub(crate) fn identifier_prefix(texts: &[&str], glued: &[bool]) -> usize {
    let is_sep = |t: &str| matches!(t, "-" | "_" | ".");
    let all_digits = |t: &str| t.chars().all(|c| c.is_ascii_digit());
    if texts.len() < 3 || !texts[0].chars().all(char::is_alphabetic) {
        return 0;
    }
    let mut n = 1;
    while n + 1 < texts.len() && glued[n] && glued[n + 1] && is_sep(texts[n]) && all_digits(texts[n + 1]) {
        n += 2;
    }
    if n == 1 {
        0
    } else {
        n
    }
}

impl ReferenceReader {
    pub fn new(max_window: usize) -> Self {
        assert!(max_window >= 1, "window must hold at least one token");
        Self { max_window }
    }

    fn views(&self, question_terms: &HashSet<String>, passage: &str) -> Vec<SentenceView> {
        split_sentences(passage)
            .into_iter()
            .map(|s| {
                let texts: Vec<&str> = s.tokens.iter().map(|t| t.text.as_str()).collect();
                let glued: Vec<bool> = (0..s.tokens.len())
                    .map(|i| i > 0 && s.tokens[i].byte_start == s.tokens[i - 1].byte_end)
                    .collect();
                let ident = identifier_prefix(&texts, &glued);
                let mut classes = Vec::with_capacity(texts.len());
                let mut terms = Vec::with_capacity(texts.len());
                for (i, t) in texts.iter().enumerate() {
                    let lower = t.to_lowercase();
                    let class = if !lexicon::is_word(t) {
                        Class::Punct
                    } else if i < ident {
                        Class::Ident
                    } else if lexicon::is_stopword(&lower) {
                        Class::Stop
                    } else if question_terms.contains(&lower) {
                        Class::Asked
                    } else {
                        Class::Novel
                    };
                    classes.push(class);
                    terms.push(lower);
                }
                SentenceView {
                    spans: s.tokens.iter().map(|t| (t.start, t.end)).collect(),
                    terms,
                    classes,
                }
            })
            .collect()
    }

    /// Returns `(start, end, score)` in passage char offsets.
    pub fn best_window(&self, question: &str, passage: &str) -> Option<(usize, usize, f64)> {
        let question_list = lexicon::content_terms(question);
        let question_terms: HashSet<String> = question_list.iter().cloned().collect();
        let views = self.views(&question_terms, passage);

        let mut best: Option<(usize, usize, f64)> = None;
        for v in &views {
            self.score_sentence(v, &question_terms, &mut best);
        }
        if best.is_some_and(|b| b.2 > 0.0) {
            return best;
        }

        // nothing novel next to the question words: highest plain overlap
        let mut best: Option<(usize, usize, f64)> = None;
        for v in &views {
            for (a, b) in self.windows(v) {
                let window_terms: Vec<String> = (a..=b)
                    .filter(|&i| v.classes[i].is_content())
                    .map(|i| v.terms[i].clone())
                    .collect();
                let f1 = lexicon::overlap_f1(&window_terms, &question_list);
                consider(&mut best, v.spans[a].0, v.spans[b].1, f1);
            }
        }
        if best.is_some_and(|b| b.2 > 0.0) {
            return best;
        }

        // first window, preferring content words, then any word, then any token
        let first = |pred: &dyn Fn(Class) -> bool| {
            views.iter().find_map(|v| {
                v.classes
                    .iter()
                    .position(|c| pred(*c))
                    .map(|i| (v.spans[i].0, v.spans[i].1, 0.0))
            })
        };
        first(&|c| c.is_content())
            .or_else(|| first(&|c| c != Class::Punct))
            .or_else(|| first(&|_| true))
    }

    /// Inclusive token ranges of at most `max_window` tokens that begin and
    /// end on content words.
    fn windows(&self, v: &SentenceView) -> Vec<(usize, usize)> {
        let n = v.classes.len();
        let mut out = Vec::new();
        for a in (0..n).filter(|&a| v.classes[a].is_content()) {
            for b in (a..n.min(a + self.max_window)).filter(|&b| v.classes[b].is_content()) {
                out.push((a, b));
            }
        }
        out
    }

    fn score_sentence(&self, v: &SentenceView, question: &HashSet<String>, best: &mut Option<(usize, usize, f64)>) {
        let n = v.classes.len();
        let novel_total = v.classes.iter().filter(|c| **c == Class::Novel).count();
        if novel_total == 0 || question.is_empty() {
            return;
        }
        let mut sentence_counts: HashMap<&str, usize> = HashMap::new();
        for i in 0..n {
            if v.classes[i].is_content() {
                *sentence_counts.entry(v.terms[i].as_str()).or_default() += 1;
            }
        }

        // content words between position i and the nearest asked word on
        // each side (exclusive), None when there is none
        let mut left_gap = vec![None; n];
        let mut gap: Option<usize> = None;
        for (slot, class) in left_gap.iter_mut().zip(&v.classes) {
            *slot = gap;
            match class {
                Class::Asked => gap = Some(0),
                Class::Novel => gap = gap.map(|g| g + 1),
                _ => {}
            }
        }
        let mut right_gap = vec![None; n];
        let mut gap: Option<usize> = None;
        for i in (0..n).rev() {
            right_gap[i] = gap;
            match v.classes[i] {
                Class::Asked => gap = Some(0),
                Class::Novel => gap = gap.map(|g| g + 1),
                _ => {}
            }
        }

        for (a, b) in self.windows(v) {
            let mut novel = 0;
            let mut content = 0;
            let mut inside: HashMap<&str, usize> = HashMap::new();
            for i in a..=b {
                match v.classes[i] {
                    Class::Novel => {
                        novel += 1;
                        content += 1;
                    }
                    Class::Asked => content += 1,
                    _ => continue,
                }
                *inside.entry(v.terms[i].as_str()).or_default() += 1;
            }
            if novel == 0 {
                continue;
            }
            let mut outside = 0;
            let mut shared = 0;
            for (term, &count) in &sentence_counts {
                if inside.get(term).copied().unwrap_or(0) < count {
                    outside += 1;
                    if question.contains(*term) {
                        shared += 1;
                    }
                }
            }
            if shared == 0 {
                continue;
            }
            let sp = shared as f64 / outside as f64;
            let sr = shared as f64 / question.len() as f64;
            let support = 2.0 * sp * sr / (sp + sr);

            let p = novel as f64 / content as f64;
            let r = novel as f64 / novel_total as f64;
            let answer = 2.0 * p * r / (p + r);

            let g = match (left_gap[a], right_gap[b]) {
                (Some(l), Some(r)) => l.min(r),
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => continue,
            };
            let proximity = 1.0 / (1.0 + g as f64);

            consider(best, v.spans[a].0, v.spans[b].1, support * answer * proximity);
        }
    }
}

fn consider(best: &mut Option<(usize, usize, f64)>, start: usize, end: usize, score: f64) {
    let better = match best {
        None => true,
        Some((bs, be, bscore)) => score > *bscore || (score == *bscore && (start, end) < (*bs, *be)),
    };
    if better {
        *best = Some((start, end, score));
    }
}

impl Reader for ReferenceReader {
    fn name(&self) -> &str {
        "reference"
    }

    fn extract(&self, question: &str, passage_text: &str) -> Result<Option<SpanPrediction>, PluginError> {
        Ok(self
            .best_window(question, passage_text)
            .map(|(start, end, score)| SpanPrediction { start, end, score }))
    }
}

/// Reader backed by a plugin: request `{question, passage_text}`, response
/// `{start, end, score}` in character offsets. A response with a null or
/// missing `start` means the reader abstains.
#[derive(Debug)]
pub struct PluginReader {
    name: String,
    max_tokens: Option<usize>,
    plugin: JsonPlugin,
}

#[derive(Serialize)]
struct ReadRequest<'a> {
    question: &'a str,
    passage_text: &'a str,
}

#[derive(Deserialize)]
struct ReadResponse {
    start: Option<usize>,
    end: Option<usize>,
    #[serde(default)]
    score: f64,
}

impl PluginReader {
    pub fn new(name: impl Into<String>, max_tokens: Option<usize>, spec: PluginSpec) -> Self {
        Self {
            name: name.into(),
            max_tokens,
            plugin: JsonPlugin::new(spec),
        }
    }
}

impl Reader for PluginReader {
    fn name(&self) -> &str {
        &self.name
    }

    fn max_tokens(&self) -> Option<usize> {
        self.max_tokens
    }

    fn extract(&self, question: &str, passage_text: &str) -> Result<Option<SpanPrediction>, PluginError> {
        let resp: ReadResponse = self.plugin.call(&ReadRequest { question, passage_text })?;
        Ok(match (resp.start, resp.end) {
            (Some(start), Some(end)) => Some(SpanPrediction {
                start,
                end,
                score: resp.score,
            }),
            _ => None,
        })
    }

    fn concurrency_safe(&self) -> bool {
        self.plugin.concurrency_safe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textseg::{tokenize, Source};

    fn passage(text: &str) -> Passage {
        Passage {
            id: "p#0000".into(),
            doc_id: "p".into(),
            source: Source::Srs,
            paragraph_index: 0,
            sentence_range: (0, 0),
            text: text.into(),
            token_count: tokenize(text).len(),
            oversized: false,
        }
    }

    fn answer(q: &str, p: &str) -> AnswerSpan {
        extract_answer(&ReferenceReader::default(), q, &passage(p)).unwrap().unwrap()
    }

    #[test]
    fn wet_mass_limit() {
        let a = answer("What shall the wet mass not exceed?", "The wet mass shall not exceed 3004 kg");
        assert_eq!(a.text, "3004 kg");
        assert!(a.score > 0.0);
    }

    #[test]
    fn identifier_prefix_is_never_the_answer() {
        let a = answer(
            "What shall the spacecraft wet mass not exceed?",
            "DR-13 The spacecraft wet mass shall not exceed 3004 kg.",
        );
        assert_eq!(a.text, "3004 kg");
    }

    #[test]
    fn recompute_requirement() {
        let a = answer(
            "How often shall the wet mass of the spacecraft be updated?",
            "DR-27 The wet mass of the spacecraft shall be recomputed and recorded in the mission database.",
        );
        assert!(a.text.contains("recomputed and recorded in the mission database"), "{}", a.text);
    }

    #[test]
    fn self_match_returns_highest_overlap_window() {
        let p = "The star tracker shall report attitude. Telemetry is stored onboard.";
        let a = answer("The star tracker shall report attitude.", p);
        assert_eq!(a.text, "star tracker shall report attitude");
    }

    #[test]
    fn absent_question_words_fall_back_to_first_window() {
        let a = answer("zebra quantum?", "The rover shall log odometry.");
        assert_eq!(a.text, "rover");
        assert_eq!(a.score, 0.0);
        assert_eq!((a.start, a.end), (4, 9));
    }

    #[test]
    fn single_sentence_never_empty() {
        let a = answer("What is logged?", "Odometry logged.");
        assert!(!a.text.is_empty());
        assert!(a.start < a.end);
    }

    #[test]
    fn offsets_are_char_based() {
        let p = "Le système doit émettre 12 W.";
        let a = answer("Que doit émettre le système?", p);
        let sliced: String = p.chars().skip(a.start).take(a.end - a.start).collect();
        assert_eq!(sliced, a.text);
    }

    #[test]
    fn capacity_is_enforced() {
        struct Tiny;
        impl Reader for Tiny {
            fn name(&self) -> &str {
                "tiny"
            }
            fn max_tokens(&self) -> Option<usize> {
                Some(2)
            }
            fn extract(&self, _: &str, _: &str) -> Result<Option<SpanPrediction>, PluginError> {
                Ok(None)
            }
        }
        let err = extract_answer(&Tiny, "q", &passage("one two three")).unwrap_err();
        assert!(matches!(err, ReaderError::PassageTooLong { tokens: 3, capacity: 2, .. }));
        assert!(extract_answer(&Tiny, "q", &passage("one two")).unwrap().is_none());
    }

    #[test]
    fn invalid_plugin_span_rejected() {
        struct Bad;
        impl Reader for Bad {
            fn name(&self) -> &str {
                "bad"
            }
            fn extract(&self, _: &str, _: &str) -> Result<Option<SpanPrediction>, PluginError> {
                Ok(Some(SpanPrediction { start: 3, end: 99, score: 1.0 }))
            }
        }
        assert!(matches!(
            extract_answer(&Bad, "q", &passage("short")),
            Err(ReaderError::InvalidSpan { .. })
        ));
    }

    #[test]
    fn empty_passage_rejected() {
        assert!(matches!(
            extract_answer(&ReferenceReader::default(), "q", &passage("   ")),
            Err(ReaderError::EmptyPassage { .. })
        ));
    }

    #[test]
    fn identifier_detection() {
        let ids = |s: &str| {
            let toks = tokenize(s);
            let texts: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
            let glued: Vec<bool> = (0..toks.len()).map(|i| i > 0 && toks[i].byte_start == toks[i - 1].byte_end).collect();
            identifier_prefix(&texts, &glued)
        };
        assert_eq!(ids("DR-13 The mass"), 3);
        assert_eq!(ids("SCIR-20.1 The camera"), 5);
        assert_eq!(ids("The mass - 13"), 0);
        assert_eq!(ids("DR - 13 x"), 0);
    }
}
