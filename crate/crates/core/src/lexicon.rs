//! Word lists shipped with the crate and the lexical normalisation shared by
//! retrievers, the reference reader and the metrics.

use std::collections::HashSet;
use std::sync::OnceLock;

use crate::textseg::{tokenize, Token};

const STOPWORDS: &str = include_str!("../data/stopwords.txt");
const ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");
const GENERIC_WORDS: &str = include_str!("../data/generic_words.txt");

fn parse_list(raw: &'static str) -> HashSet<&'static str> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| parse_list(STOPWORDS))
}

fn abbreviations() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| parse_list(ABBREVIATIONS))
}

fn generic_words() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| parse_list(GENERIC_WORDS))
}

/// `word` must already be lowercased.
pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// `candidate` is the lowercased text from the preceding whitespace up to and
/// including the period, e.g. `"e.g."`.
pub fn is_abbreviation(candidate: &str) -> bool {
    abbreviations().contains(candidate)
}

/// Whether a lowercased phrase is an entry of the general-English lexicon.
pub fn is_generic(phrase: &str) -> bool {
    generic_words().contains(phrase)
}

pub fn is_word(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_alphanumeric)
}

/// Lowercased word tokens, punctuation dropped.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| is_word(&t.text))
        .map(|t| t.text.to_lowercase())
        .collect()
}

/// Lowercased word tokens with stopwords removed. This is the term stream
/// the lexical retrievers index.
pub fn content_terms(text: &str) -> Vec<String> {
    words(text).into_iter().filter(|w| !is_stopword(w)).collect()
}

/// Whether a token is a non-stopword word.
pub fn is_content(token: &Token) -> bool {
    is_word(&token.text) && !is_stopword(&token.text.to_lowercase())
}

/// Size of the multiset intersection of two token lists.
pub fn multiset_overlap(a: &[String], b: &[String]) -> usize {
    let mut counts: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for t in b {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut shared = 0;
    for t in a {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    shared
}

/// Harmonic mean of overlap precision (over `pred`) and recall (over `gold`).
pub fn overlap_f1(pred: &[String], gold: &[String]) -> f64 {
    let shared = multiset_overlap(pred, gold);
    if shared == 0 {
        return 0.0;
    }
    let p = shared as f64 / pred.len() as f64;
    let r = shared as f64 / gold.len() as f64;
    2.0 * p * r / (p + r)
}
