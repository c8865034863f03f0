//! Tokenization, sentence splitting and the bounded passage splitter.
//!
//! A passage is a paragraph unless the paragraph holds more tokens than the
//! configured budget. Long paragraphs are cut greedily at sentence
//! boundaries, and each new passage starts at the last sentence of the
//! previous one, so consecutive passages of the same paragraph share exactly
//! one sentence.
//!
//! All public offsets are character (Unicode scalar) offsets. Byte offsets
//! are carried alongside for slicing.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::lexicon;

#[derive(Debug, thiserror::Error)]
pub enum TextsegError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("document {doc_id}: paragraph {index} appears more than once")]
    DuplicateParagraph { doc_id: String, index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    #[serde(skip)]
    pub byte_start: usize,
    #[serde(skip)]
    pub byte_end: usize,
}

/// Splits text into maximal runs of letters/digits and single punctuation
/// marks. Whitespace separates tokens and is never part of one.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    // (char start, byte start) of the alphanumeric run in progress
    let mut run: Option<(usize, usize)> = None;
    let mut char_pos = 0;

    let flush = |run: &mut Option<(usize, usize)>, tokens: &mut Vec<Token>, end_c, end_b| {
        if let Some((sc, sb)) = run.take() {
            tokens.push(Token {
                text: text[sb..end_b].to_string(),
                start: sc,
                end: end_c,
                byte_start: sb,
                byte_end: end_b,
            });
        }
    };

    for (byte_pos, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if run.is_none() {
                run = Some((char_pos, byte_pos));
            }
        } else {
            flush(&mut run, &mut tokens, char_pos, byte_pos);
            if !ch.is_whitespace() {
                let byte_end = byte_pos + ch.len_utf8();
                tokens.push(Token {
                    text: text[byte_pos..byte_end].to_string(),
                    start: char_pos,
                    end: char_pos + 1,
                    byte_start: byte_pos,
                    byte_end,
                });
            }
        }
        char_pos += 1;
    }
    flush(&mut run, &mut tokens, char_pos, text.len());
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub tokens: Vec<Token>,
    pub start: usize,
    pub end: usize,
    #[serde(skip)]
    pub byte_start: usize,
    #[serde(skip)]
    pub byte_end: usize,
}

impl Sentence {
    pub fn text<'a>(&self, paragraph: &'a str) -> &'a str {
        &paragraph[self.byte_start..self.byte_end]
    }
}

fn is_terminal(tok: &str) -> bool {
    matches!(tok, "." | "!" | "?")
}

fn is_closer(tok: &str) -> bool {
    matches!(tok, "\"" | "'" | ")" | "]" | "\u{201d}" | "\u{2019}")
}

/// Splits a paragraph into sentences. A boundary is a run of `.`, `!` or `?`
/// (plus any closing quotes or brackets glued to it) followed by whitespace
/// and then an uppercase letter or a digit. A period ending a listed
/// abbreviation never closes a sentence.
pub fn split_sentences(paragraph: &str) -> Vec<Sentence> {
    let tokens = tokenize(paragraph);
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut i = 0;

    while i < tokens.len() {
        current.push(tokens[i].clone());
        if is_terminal(&tokens[i].text) {
            let mut j = i + 1;
            while j < tokens.len()
                && tokens[j].byte_start == tokens[j - 1].byte_end
                && (is_terminal(&tokens[j].text) || is_closer(&tokens[j].text))
            {
                j += 1;
            }
            let last = &tokens[j - 1];
            let boundary = match tokens.get(j) {
                Some(next) => {
                    next.byte_start > last.byte_end
                        && next
                            .text
                            .chars()
                            .next()
                            .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
                }
                None => false,
            } && !(tokens[i].text == "." && ends_abbreviation(paragraph, &tokens[i]));
            if boundary {
                current.extend(tokens[i + 1..j].iter().cloned());
                sentences.push(make_sentence(sentences.len(), std::mem::take(&mut current)));
                i = j;
                continue;
            }
        }
        i += 1;
    }
    if !current.is_empty() {
        sentences.push(make_sentence(sentences.len(), current));
    }
    sentences
}

fn ends_abbreviation(paragraph: &str, period: &Token) -> bool {
    let before = &paragraph[..period.byte_end];
    let word_start = before
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map(|(b, c)| b + c.len_utf8())
        .unwrap_or(0);
    let candidate = before[word_start..].to_lowercase();
    let candidate = candidate.trim_start_matches(['(', '[', '"', '\'']);
    lexicon::is_abbreviation(candidate)
}

fn make_sentence(index: usize, tokens: Vec<Token>) -> Sentence {
    let first = &tokens[0];
    let last = &tokens[tokens.len() - 1];
    Sentence {
        index,
        start: first.start,
        end: last.end,
        byte_start: first.byte_start,
        byte_end: last.byte_end,
        tokens,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Srs,
    Corpus,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Source::Srs => "srs",
            Source::Corpus => "corpus",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    /// `<doc_id>#<ordinal>`, ordinal zero-padded to four digits.
    pub id: String,
    pub doc_id: String,
    pub source: Source,
    pub paragraph_index: usize,
    /// Inclusive range of sentence ordinals within the paragraph.
    pub sentence_range: (usize, usize),
    pub text: String,
    pub token_count: usize,
    /// Set when the passage is a single sentence longer than the budget.
    #[serde(default)]
    pub oversized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub token_budget: usize,
    pub overlap_sentences: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            token_budget: 512,
            overlap_sentences: 1,
        }
    }
}

/// A document decomposed into paragraphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct ParagraphRecord {
    pub doc_id: String,
    pub paragraph_index: usize,
    pub text: String,
}

impl Document {
    /// Paragraphs are blocks separated by one or more blank lines.
    pub fn from_plain_text(id: impl Into<String>, text: &str) -> Self {
        let mut paragraphs = Vec::new();
        let mut block: Vec<&str> = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                if !block.is_empty() {
                    paragraphs.push(block.join("\n").trim().to_string());
                    block.clear();
                }
            } else {
                block.push(line);
            }
        }
        if !block.is_empty() {
            paragraphs.push(block.join("\n").trim().to_string());
        }
        Self {
            id: id.into(),
            paragraphs,
        }
    }

    /// Reads JSON Lines of `{doc_id, paragraph_index, text}`. Documents keep
    /// the order of their first appearance; paragraphs are ordered by index.
    pub fn from_jsonl(reader: impl BufRead) -> Result<Vec<Self>, TextsegError> {
        let mut order: Vec<String> = Vec::new();
        let mut docs: BTreeMap<String, BTreeMap<usize, String>> = BTreeMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ParagraphRecord = serde_json::from_str(&line)
                .map_err(|source| TextsegError::Json { line: n + 1, source })?;
            let paras = docs.entry(rec.doc_id.clone()).or_insert_with(|| {
                order.push(rec.doc_id.clone());
                BTreeMap::new()
            });
            if paras.insert(rec.paragraph_index, rec.text).is_some() {
                return Err(TextsegError::DuplicateParagraph {
                    doc_id: rec.doc_id,
                    index: rec.paragraph_index,
                });
            }
        }
        Ok(order
            .into_iter()
            .map(|id| {
                let paragraphs = docs
                    .remove(&id)
                    .unwrap_or_default()
                    .into_values()
                    .filter(|p| !p.trim().is_empty())
                    .collect();
                Document { id, paragraphs }
            })
            .collect())
    }

    pub fn is_empty(&self) -> bool {
        self.paragraphs.iter().all(|p| p.trim().is_empty())
    }

    pub fn text(&self) -> String {
        self.paragraphs.join("\n\n")
    }
}

/// Splits every paragraph of `doc` into passages under `config`.
pub fn split_passages(doc: &Document, source: Source, config: &SplitConfig) -> Vec<Passage> {
    let budget = config.token_budget.max(1);
    let mut out = Vec::new();
    for (pi, paragraph) in doc.paragraphs.iter().enumerate() {
        let sentences = split_sentences(paragraph);
        if sentences.is_empty() {
            continue;
        }
        for (first, last) in greedy_ranges(&sentences, budget, config.overlap_sentences) {
            let a = &sentences[first];
            let b = &sentences[last];
            let token_count = sentences[first..=last].iter().map(|s| s.tokens.len()).sum();
            out.push(Passage {
                id: format!("{}#{:04}", doc.id, out.len()),
                doc_id: doc.id.clone(),
                source,
                paragraph_index: pi,
                sentence_range: (a.index, b.index),
                text: paragraph[a.byte_start..b.byte_end].to_string(),
                token_count,
                oversized: token_count > budget,
            });
        }
    }
    out
}

/// Inclusive sentence ranges for one paragraph.
fn greedy_ranges(sentences: &[Sentence], budget: usize, overlap: usize) -> Vec<(usize, usize)> {
    let lens: Vec<usize> = sentences.iter().map(|s| s.tokens.len()).collect();
    let n = lens.len();
    if lens.iter().sum::<usize>() <= budget {
        return vec![(0, n - 1)];
    }
    let mut ranges = Vec::new();
    let mut start = 0;
    loop {
        let mut end = start;
        let mut total = lens[start];
        while end + 1 < n && total + lens[end + 1] <= budget {
            end += 1;
            total += lens[end];
        }
        ranges.push((start, end));
        if end + 1 >= n {
            break;
        }
        // Restart on the overlap sentences when the next passage can still
        // advance past them; otherwise continue without overlap.
        let candidate = (end + 1).saturating_sub(overlap).max(start + 1);
        let overlap_len: usize = lens[candidate..=end].iter().sum();
        start = if candidate <= end && overlap_len + lens[end + 1] <= budget {
            candidate
        } else {
            end + 1
        };
    }
    ranges
}
