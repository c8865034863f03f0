//! Question-answer pair generation, top-fraction filtering and validation.
//!
//! The reference generator picks an answer span from a passage (a numeric
//! quantity, a capitalized multi-word name, or the object after a modal
//! verb) and turns the containing sentence into a question by replacing the
//! span with a wh-word and inverting the auxiliary. The reference evaluator
//! scores how well the pair is grounded in the passage. Both are rule-based
//! stand-ins; neural models attach through the plugin adapter.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lexicon;
use crate::plugin::{JsonPlugin, PluginError, PluginSpec};
use crate::reader::identifier_prefix;
use crate::textseg::{split_sentences, Passage, Sentence, Source};

#[derive(Debug, thiserror::Error)]
pub enum QgenError {
    #[error("fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("annotations reference unknown pair ids: {}", .0.join(", "))]
    UnknownPairIds(Vec<String>),
    #[error("pair {pair_id} is labeled {label} but carries no replacement text")]
    MissingCorrection { pair_id: String, label: &'static str },
    #[error("duplicate pair id `{0}`")]
    DuplicatePairId(String),
    #[error("both questions must contain at least one token")]
    EmptyInput,
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("component failed: {0}")]
    Component(#[from] PluginError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "auto")]
    Auto,
    #[serde(rename = "man", alias = "manual")]
    Manual,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionLabel {
    Valid,
    Rephrased,
    Invalid,
    #[default]
    Unlabeled,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerLabel {
    Correct,
    Corrected,
    Invalid,
    /// The answer is not supported by the passage; treated as invalid.
    NotInContext,
    #[default]
    Unlabeled,
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub domain: String,
    pub source: Source,
    pub doc_id: String,
    pub passage_id: String,
    pub passage_text: String,
    pub question: String,
    pub answer: String,
    pub origin: Origin,
    #[serde(default)]
    pub question_label: QuestionLabel,
    #[serde(default)]
    pub answer_label: AnswerLabel,
    #[serde(default)]
    pub generator_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluator_score: Option<f64>,
}

impl QAPair {
    /// `srs:<doc_id>` for SRS pairs, `corpus:<domain>` for article pairs.
    pub fn group_key(&self) -> String {
        match self.source {
            Source::Srs => format!("srs:{}", self.doc_id),
            Source::Corpus => format!("corpus:{}", self.domain),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub score: f64,
}

pub trait Generator: Send + Sync {
    fn name(&self) -> &str;
    /// Pairs for one passage. Must be deterministic for a given seed.
    fn generate(&self, passage_text: &str, seed: u64) -> Result<Vec<Generated>, PluginError>;
    fn concurrency_safe(&self) -> bool {
        true
    }
}

pub trait Evaluator: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, question: &str, answer: &str, passage_text: &str) -> Result<f64, PluginError>;
    fn concurrency_safe(&self) -> bool {
        true
    }
}

const MODALS: &[&str] = &["shall", "must", "will", "should", "may", "can", "would", "could", "might"];
const BE: &[&str] = &["is", "are", "was", "were"];
const DETERMINERS: &[&str] = &[
    "a", "an", "the", "its", "their", "his", "her", "our", "this", "that", "these", "those", "each", "every", "any",
    "all",
];
const WH: &[&str] = &["what", "which", "who", "whom", "whose", "when", "where", "why", "how"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum AnswerKind {
    Quantity,
    Name,
    Object,
}

impl AnswerKind {
    fn confidence(self) -> f64 {
        match self {
            AnswerKind::Quantity => 0.9,
            AnswerKind::Name => 0.8,
            AnswerKind::Object => 0.7,
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    sentence: usize,
    start: usize,
    end: usize,
    kind: AnswerKind,
}

/// Rule-based generator; see the module docs.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceGenerator {
    pub max_pairs_per_passage: usize,
    /// Longest object span, in tokens.
    pub max_object_tokens: usize,
}

impl Default for ReferenceGenerator {
    fn default() -> Self {
        Self {
            max_pairs_per_passage: 3,
            max_object_tokens: 6,
        }
    }
}

struct View<'a> {
    text: &'a str,
    s: &'a Sentence,
    lower: Vec<String>,
    body: (usize, usize),
}

impl View<'_> {
    fn tok(&self, i: usize) -> &str {
        &self.s.tokens[i].text
    }

    fn glued(&self, i: usize) -> bool {
        i > 0 && self.s.tokens[i].byte_start == self.s.tokens[i - 1].byte_end
    }

    fn slice(&self, a: usize, b: usize) -> &str {
        if a >= b {
            return "";
        }
        &self.text[self.s.tokens[a].byte_start..self.s.tokens[b - 1].byte_end]
    }

    fn is_content(&self, i: usize) -> bool {
        lexicon::is_word(self.tok(i)) && !lexicon::is_stopword(&self.lower[i])
    }

    fn is_determiner(&self, i: usize) -> bool {
        DETERMINERS.contains(&self.lower[i].as_str())
    }
}

fn starts_with_digit(t: &str) -> bool {
    t.chars().next().is_some_and(|c| c.is_ascii_digit())
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn uppercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn join_nonempty(parts: &[&str]) -> String {
    parts.iter().filter(|p| !p.is_empty()).copied().collect::<Vec<_>>().join(" ")
}

impl ReferenceGenerator {
    fn view<'a>(text: &'a str, s: &'a Sentence) -> View<'a> {
        let texts: Vec<&str> = s.tokens.iter().map(|t| t.text.as_str()).collect();
        let glued: Vec<bool> = (0..s.tokens.len())
            .map(|i| i > 0 && s.tokens[i].byte_start == s.tokens[i - 1].byte_end)
            .collect();
        let start = identifier_prefix(&texts, &glued);
        let mut end = s.tokens.len();
        while end > start && !lexicon::is_word(texts[end - 1]) {
            end -= 1;
        }
        View {
            text,
            s,
            lower: texts.iter().map(|t| t.to_lowercase()).collect(),
            body: (start, end),
        }
    }

    fn aux(v: &View<'_>) -> Option<usize> {
        (v.body.0..v.body.1).find(|&i| MODALS.contains(&v.lower[i].as_str()) || BE.contains(&v.lower[i].as_str()))
    }

    fn candidates(&self, v: &View<'_>, sentence: usize) -> Vec<Candidate> {
        let (lo, hi) = v.body;
        let mut out = Vec::new();
        let mut push = |start, end, kind| out.push(Candidate { sentence, start, end, kind });

        let mut i = lo;
        while i < hi {
            if !starts_with_digit(v.tok(i)) {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j + 1 < hi && v.glued(j) && v.glued(j + 1) && matches!(v.tok(j), "." | ",") && starts_with_digit(v.tok(j + 1)) {
                j += 2;
            }
            if j < hi {
                let t = v.tok(j);
                let unit = (t == "%" && v.glued(j))
                    || (t.chars().all(char::is_alphabetic) && t.chars().count() <= 8 && !lexicon::is_stopword(&v.lower[j]));
                if unit {
                    j += 1;
                }
            }
            push(i, j, AnswerKind::Quantity);
            i = j;
        }

        let capital = |i: usize| {
            v.tok(i).chars().next().is_some_and(char::is_uppercase) && v.is_content(i)
        };
        let mut i = lo;
        while i < hi {
            if !capital(i) {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < hi && capital(j) {
                j += 1;
            }
            if j - i >= 2 {
                push(i, j, AnswerKind::Name);
            }
            i = j;
        }

        if let Some(x) = Self::aux(v) {
            let mut k = x + 1;
            let modal = MODALS.contains(&v.lower[x].as_str());
            while k < hi && matches!(v.lower[k].as_str(), "not" | "also" | "be") {
                k += 1;
            }
            if modal {
                // the verb
                if k < hi && v.is_content(k) {
                    k += 1;
                } else {
                    k = hi;
                }
            }
            while k < hi && v.is_determiner(k) {
                k += 1;
            }
            if k < hi && v.is_content(k) {
                let mut end = k;
                while end < hi && end - k < self.max_object_tokens && v.is_content(end) {
                    end += 1;
                }
                push(k, end, AnswerKind::Object);
            }
        }
        out
    }

    /// Wh-question for the sentence with tokens `[a, b)` as the answer.
    fn question(v: &View<'_>, a: usize, b: usize) -> String {
        let (lo, hi) = v.body;
        let suffix = v.slice(b, hi);
        let mut pre_end = a;
        while pre_end > lo && v.is_determiner(pre_end - 1) {
            pre_end -= 1;
        }
        match Self::aux(v) {
            Some(x) if a > x && x > lo => {
                let mut subject = v.slice(lo, x).to_string();
                if lexicon::is_stopword(&v.lower[lo]) {
                    subject = lowercase_first(&subject);
                }
                let middle = v.slice(x + 1, pre_end.max(x + 1));
                format!("What {} {}?", join_nonempty(&[&v.lower[x], &subject, middle]), suffix)
                    .replace(" ?", "?")
            }
            _ => {
                let prefix = v.slice(lo, pre_end);
                if prefix.is_empty() {
                    format!("What {suffix}?").replace(" ?", "?")
                } else {
                    uppercase_first(&format!("{}?", join_nonempty(&[prefix, "what", suffix])))
                }
            }
        }
    }

    fn passage_seed(seed: u64, passage_text: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(passage_text.as_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn generate_for(&self, passage_text: &str, seed: u64) -> Vec<Generated> {
        let sentences = split_sentences(passage_text);
        let views: Vec<View<'_>> = sentences.iter().map(|s| Self::view(passage_text, s)).collect();
        let mut seen: HashSet<String> = HashSet::new();
        let mut candidates: Vec<Candidate> = Vec::new();
        for (si, v) in views.iter().enumerate() {
            if v.body.1 <= v.body.0 + 2 {
                continue;
            }
            for c in self.candidates(v, si) {
                if seen.insert(v.slice(c.start, c.end).to_lowercase()) {
                    candidates.push(c);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(Self::passage_seed(seed, passage_text));
        candidates.shuffle(&mut rng);
        candidates.truncate(self.max_pairs_per_passage);
        candidates.sort_by_key(|c| (c.sentence, c.start, c.end));
        candidates
            .into_iter()
            .map(|c| {
                let v = &views[c.sentence];
                Generated {
                    question: Self::question(v, c.start, c.end),
                    answer: v.slice(c.start, c.end).to_string(),
                    score: c.kind.confidence(),
                }
            })
            .collect()
    }
}

impl Generator for ReferenceGenerator {
    fn name(&self) -> &str {
        "reference"
    }

    fn generate(&self, passage_text: &str, seed: u64) -> Result<Vec<Generated>, PluginError> {
        Ok(self.generate_for(passage_text, seed))
    }
}

/// Grounding x well-formedness. Grounding is the share of answer tokens
/// found in the passage, weighted up by the share of question content terms
/// found there too. A question is well formed when it ends with `?` and
/// opens with a wh-word or an auxiliary; ending with `?` alone counts half.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceEvaluator;

pub fn question_form_score(question: &str) -> f64 {
    let q = question.trim();
    if !q.ends_with('?') {
        return 0.0;
    }
    let first = lexicon::words(q).into_iter().next().unwrap_or_default();
    let opener = WH.contains(&first.as_str())
        || MODALS.contains(&first.as_str())
        || BE.contains(&first.as_str())
        || matches!(first.as_str(), "do" | "does" | "did" | "has" | "have");
    if opener {
        1.0
    } else {
        0.5
    }
}

impl Evaluator for ReferenceEvaluator {
    fn name(&self) -> &str {
        "reference"
    }

    fn evaluate(&self, question: &str, answer: &str, passage_text: &str) -> Result<f64, PluginError> {
        let answer_words = lexicon::words(answer);
        if answer_words.is_empty() {
            return Ok(0.0);
        }
        let support = lexicon::multiset_overlap(&answer_words, &lexicon::words(passage_text)) as f64
            / answer_words.len() as f64;
        let q_terms = lexicon::content_terms(question);
        let context = if q_terms.is_empty() {
            0.0
        } else {
            lexicon::multiset_overlap(&q_terms, &lexicon::content_terms(passage_text)) as f64 / q_terms.len() as f64
        };
        Ok(support * question_form_score(question) * (0.5 + 0.5 * context))
    }
}

/// Generator plugin: request `{passage_text, seed}`, response
/// `{pairs: [{question, answer, score}]}`.
#[derive(Debug)]
pub struct PluginGenerator {
    name: String,
    plugin: JsonPlugin,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    passage_text: &'a str,
    seed: u64,
}

#[derive(Deserialize)]
struct GenerateResponse {
    pairs: Vec<Generated>,
}

impl PluginGenerator {
    pub fn new(name: impl Into<String>, spec: PluginSpec) -> Self {
        Self {
            name: name.into(),
            plugin: JsonPlugin::new(spec),
        }
    }
}

impl Generator for PluginGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, passage_text: &str, seed: u64) -> Result<Vec<Generated>, PluginError> {
        let resp: GenerateResponse = self.plugin.call(&GenerateRequest { passage_text, seed })?;
        Ok(resp.pairs)
    }

    fn concurrency_safe(&self) -> bool {
        self.plugin.concurrency_safe()
    }
}

/// Evaluator plugin: request `{question, answer, passage_text}`, response
/// `{score}`.
#[derive(Debug)]
pub struct PluginEvaluator {
    name: String,
    plugin: JsonPlugin,
}

#[derive(Serialize)]
struct EvaluateRequest<'a> {
    question: &'a str,
    answer: &'a str,
    passage_text: &'a str,
}

#[derive(Deserialize)]
struct EvaluateResponse {
    score: f64,
}

impl PluginEvaluator {
    pub fn new(name: impl Into<String>, spec: PluginSpec) -> Self {
        Self {
            name: name.into(),
            plugin: JsonPlugin::new(spec),
        }
    }
}

impl Evaluator for PluginEvaluator {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, question: &str, answer: &str, passage_text: &str) -> Result<f64, PluginError> {
        let resp: EvaluateResponse = self.plugin.call(&EvaluateRequest {
            question,
            answer,
            passage_text,
        })?;
        if !resp.score.is_finite() {
            return Err(PluginError::Protocol("evaluator returned a non-finite score".into()));
        }
        Ok(resp.score)
    }

    fn concurrency_safe(&self) -> bool {
        self.plugin.concurrency_safe()
    }
}

fn pairs_for(passage: &Passage, domain: &str, generator: &dyn Generator, seed: u64) -> Result<Vec<QAPair>, QgenError> {
    let mut out = Vec::new();
    for g in generator.generate(&passage.text, seed)? {
        if g.answer.is_empty() || !passage.text.contains(&g.answer) {
            tracing::warn!(passage = %passage.id, answer = %g.answer, "generated answer is not a passage substring; dropped");
            continue;
        }
        out.push(QAPair {
            id: format!("{}:{:02}", passage.id, out.len()),
            domain: domain.to_string(),
            source: passage.source,
            doc_id: passage.doc_id.clone(),
            passage_id: passage.id.clone(),
            passage_text: passage.text.clone(),
            question: g.question,
            answer: g.answer,
            origin: Origin::Auto,
            question_label: QuestionLabel::Unlabeled,
            answer_label: AnswerLabel::Unlabeled,
            generator_score: g.score,
            evaluator_score: None,
        });
    }
    Ok(out)
}

/// Automatic pairs for every passage, in passage order. Answers that are
/// not verbatim passage substrings are dropped.
pub fn generate_pairs(
    passages: &[Passage],
    domain: &str,
    generator: &dyn Generator,
    seed: u64,
) -> Result<Vec<QAPair>, QgenError> {
    let workers = if generator.concurrency_safe() {
        std::thread::available_parallelism().map_or(1, |n| n.get()).min(passages.len().max(1))
    } else {
        1
    };
    if workers <= 1 {
        let mut out = Vec::new();
        for p in passages {
            out.extend(pairs_for(p, domain, generator, seed)?);
        }
        return Ok(out);
    }
    let chunk = passages.len().div_ceil(workers);
    let parts: Vec<Result<Vec<QAPair>, QgenError>> = std::thread::scope(|s| {
        let handles: Vec<_> = passages
            .chunks(chunk)
            .map(|ps| {
                s.spawn(move || {
                    let mut out = Vec::new();
                    for p in ps {
                        out.extend(pairs_for(p, domain, generator, seed)?);
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("generator thread panicked")).collect()
    });
    let mut out = Vec::new();
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Attaches evaluator scores to pairs that have none.
pub fn evaluate_pairs(pairs: &mut [QAPair], evaluator: &dyn Evaluator) -> Result<(), QgenError> {
    for p in pairs.iter_mut().filter(|p| p.evaluator_score.is_none()) {
        p.evaluator_score = Some(evaluator.evaluate(&p.question, &p.answer, &p.passage_text)?);
    }
    Ok(())
}

/// Number of pairs kept from a group of `n`.
pub fn kept_per_group(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    // the epsilon keeps 0.05 * 40 at 2 despite binary rounding
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Keeps the best `max(1, ceil(fraction * n))` pairs of each group (see
/// [`QAPair::group_key`]) after dropping repeated (question, answer) pairs
/// within the group.
/// Groups appear in first-seen order; within a group pairs are ordered by
/// evaluator score, then generator score, then id.
pub fn filter_top_fraction(
    pairs: Vec<QAPair>,
    evaluator: &dyn Evaluator,
    fraction: f64,
) -> Result<Vec<QAPair>, QgenError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(QgenError::InvalidFraction(fraction));
    }
    let mut seen = HashSet::new();
    let mut pairs: Vec<QAPair> = pairs
        .into_iter()
        .filter(|p| seen.insert((p.group_key(), p.question.trim().to_lowercase(), p.answer.trim().to_lowercase())))
        .collect();
    evaluate_pairs(&mut pairs, evaluator)?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<QAPair>> = HashMap::new();
    for p in pairs {
        let key = p.group_key();
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(p);
    }
    let mut out = Vec::new();
    for key in order {
        let mut group = groups.remove(&key).unwrap_or_default();
        group.sort_by(|a, b| {
            b.evaluator_score
                .unwrap_or(0.0)
                .total_cmp(&a.evaluator_score.unwrap_or(0.0))
                .then(b.generator_score.total_cmp(&a.generator_score))
                .then_with(|| a.id.cmp(&b.id))
        });
        group.truncate(kept_per_group(group.len(), fraction));
        out.extend(group);
    }
    Ok(out)
}

/// A manual label for one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub pair_id: String,
    pub question_label: QuestionLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rephrased_question: Option<String>,
    pub answer_label: AnswerLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_answer: Option<String>,
}

/// Applies annotations: pairs with an invalid question or answer are
/// dropped, rephrased questions and corrected answers replace the generated
/// text, and `manual` pairs are appended. Pairs without an annotation are
/// kept as they are. When an id is annotated twice the last entry wins.
pub fn apply_validation(
    pairs: Vec<QAPair>,
    annotations: &[Annotation],
    manual: Vec<QAPair>,
) -> Result<Vec<QAPair>, QgenError> {
    let known: HashSet<&str> = pairs.iter().map(|p| p.id.as_str()).collect();
    let unknown: BTreeSet<String> = annotations
        .iter()
        .filter(|a| !known.contains(a.pair_id.as_str()))
        .map(|a| a.pair_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(QgenError::UnknownPairIds(unknown.into_iter().collect()));
    }
    let by_id: HashMap<&str, &Annotation> = annotations.iter().map(|a| (a.pair_id.as_str(), a)).collect();
    let mut out = Vec::with_capacity(pairs.len() + manual.len());
    for mut p in pairs {
        if let Some(a) = by_id.get(p.id.as_str()) {
            p.question_label = a.question_label;
            p.answer_label = a.answer_label;
            let invalid = p.question_label == QuestionLabel::Invalid
                || matches!(p.answer_label, AnswerLabel::Invalid | AnswerLabel::NotInContext);
            if invalid {
                continue;
            }
            if p.question_label == QuestionLabel::Rephrased {
                p.question = a.rephrased_question.clone().ok_or_else(|| QgenError::MissingCorrection {
                    pair_id: p.id.clone(),
                    label: "rephrased",
                })?;
            }
            if p.answer_label == AnswerLabel::Corrected {
                p.answer = a.corrected_answer.clone().ok_or_else(|| QgenError::MissingCorrection {
                    pair_id: p.id.clone(),
                    label: "corrected",
                })?;
            }
        }
        out.push(p);
    }
    let mut ids: HashSet<String> = out.iter().map(|p| p.id.clone()).collect();
    for mut m in manual {
        if !ids.insert(m.id.clone()) {
            return Err(QgenError::DuplicatePairId(m.id));
        }
        m.origin = Origin::Manual;
        out.push(m);
    }
    Ok(out)
}

/// `2 * |multiset overlap| / (|q1| + |q2|)` over lowercase word tokens.
pub fn simplified_bleu(q1: &str, q2: &str) -> Result<f64, QgenError> {
    let a = lexicon::words(q1);
    let b = lexicon::words(q2);
    if a.is_empty() || b.is_empty() {
        return Err(QgenError::EmptyInput);
    }
    Ok(2.0 * lexicon::multiset_overlap(&a, &b) as f64 / (a.len() + b.len()) as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub auto: usize,
    pub manual: usize,
    pub srs: usize,
    pub corpus: usize,
    pub rephrased: usize,
    pub corrected: usize,
    /// Mean simplified BLEU between generated and rephrased questions.
    pub mean_rephrase_bleu: Option<f64>,
}

/// Summary of a validated dataset. `generated` supplies the original
/// question text of rephrased pairs.
pub fn dataset_stats(generated: &[QAPair], validated: &[QAPair]) -> DatasetStats {
    let original: HashMap<&str, &str> = generated.iter().map(|p| (p.id.as_str(), p.question.as_str())).collect();
    let mut s = DatasetStats {
        total: validated.len(),
        ..DatasetStats::default()
    };
    let mut bleu = Vec::new();
    for p in validated {
        match p.origin {
            Origin::Auto => s.auto += 1,
            Origin::Manual => s.manual += 1,
        }
        match p.source {
            Source::Srs => s.srs += 1,
            Source::Corpus => s.corpus += 1,
        }
        if p.answer_label == AnswerLabel::Corrected {
            s.corrected += 1;
        }
        if p.question_label == QuestionLabel::Rephrased {
            s.rephrased += 1;
            if let Some(Ok(b)) = original.get(p.id.as_str()).map(|q| simplified_bleu(q, &p.question)) {
                bleu.push(b);
            }
        }
    }
    if !bleu.is_empty() {
        s.mean_rephrase_bleu = Some(bleu.iter().sum::<f64>() / bleu.len() as f64);
    }
    s
}

fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, QgenError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| QgenError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(mut w: impl Write, rows: &[T]) -> Result<(), QgenError> {
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|source| QgenError::Json { line: 0, source })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<QAPair>, QgenError> {
    read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn parse_dataset(reader: impl BufRead) -> Result<Vec<QAPair>, QgenError> {
    read_jsonl(reader)
}

pub fn write_dataset(path: &Path, pairs: &[QAPair]) -> Result<(), QgenError> {
    write_jsonl(std::io::BufWriter::new(std::fs::File::create(path)?), pairs)
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>, QgenError> {
    read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textseg::{split_passages, Document, SplitConfig};

    fn gen(text: &str) -> Vec<Generated> {
        ReferenceGenerator::default().generate_for(text, 7)
    }

    #[test]
    fn quantity_question_inverts_the_modal() {
        let g = gen("The spacecraft wet mass shall not exceed 3004 kg.");
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].answer, "3004 kg");
        assert_eq!(g[0].question, "What shall the spacecraft wet mass not exceed?");
    }

    #[test]
    fn identifier_is_not_an_answer() {
        let g = gen("DR-13 The spacecraft wet mass shall not exceed 3004 kg.");
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].answer, "3004 kg");
        assert_eq!(g[0].question, "What shall the spacecraft wet mass not exceed?");
    }

    #[test]
    fn names_and_objects() {
        let g = ReferenceGenerator {
            max_pairs_per_passage: 10,
            ..ReferenceGenerator::default()
        }
        .generate_for("The Mars Rover shall send telemetry.", 1);
        let got: Vec<(&str, &str)> = g.iter().map(|x| (x.answer.as_str(), x.question.as_str())).collect();
        assert!(got.contains(&("Mars Rover", "What shall send telemetry?")), "{got:?}");
        assert!(got.contains(&("telemetry", "What shall the Mars Rover send?")), "{got:?}");
    }

    #[test]
    fn object_drops_determiner() {
        let g = gen("The system shall display the current altitude to the pilot.");
        assert_eq!(g[0].answer, "current altitude");
        assert_eq!(g[0].question, "What shall the system display to the pilot?");
    }

    #[test]
    fn copula_question() {
        let g = gen("The launch mass is 3004 kg.");
        assert_eq!(g[0].question, "What is the launch mass?");
    }

    #[test]
    fn nothing_to_ask() {
        assert!(gen("The rover logs data quietly.").is_empty());
        assert!(gen("").is_empty());
    }

    #[test]
    fn seeded_and_bounded() {
        let text = "The orbiter shall downlink 12 GB per day. The lander shall carry 3 cameras. \
                    The Deep Space Network shall relay commands within 20 minutes. \
                    The battery shall store 40 Wh.";
        let g = ReferenceGenerator::default();
        let a = g.generate_for(text, 11);
        assert_eq!(a, g.generate_for(text, 11));
        assert_eq!(a.len(), 3);
        for p in &a {
            assert!(text.contains(&p.answer));
            assert!(p.question.ends_with('?'));
        }
    }

    fn passages() -> Vec<Passage> {
        let text: String = (0..40)
            .map(|i| format!("The unit {i} shall draw {} W of power.", i * 3 + 1))
            .collect::<Vec<_>>()
            .join("\n\n");
        split_passages(&Document::from_plain_text("srs-a", &text), Source::Srs, &SplitConfig::default())
    }

    #[test]
    fn generate_pairs_are_grounded_and_deterministic() {
        let ps = passages();
        let a = generate_pairs(&ps, "power", &ReferenceGenerator::default(), 3).unwrap();
        let b = generate_pairs(&ps, "power", &ReferenceGenerator::default(), 3).unwrap();
        assert_eq!(a, b);
        assert!(a.len() >= 40);
        assert!(a.iter().all(|p| p.passage_text.contains(&p.answer) && p.origin == Origin::Auto));
        let ids: HashSet<&str> = a.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids.len(), a.len());
    }

    fn pair(id: &str, source: Source, doc: &str, q: &str, a: &str) -> QAPair {
        QAPair {
            id: id.into(),
            domain: "space".into(),
            source,
            doc_id: doc.into(),
            passage_id: format!("{doc}#0000"),
            passage_text: format!("{q} {a}"),
            question: q.into(),
            answer: a.into(),
            origin: Origin::Auto,
            question_label: QuestionLabel::Unlabeled,
            answer_label: AnswerLabel::Unlabeled,
            generator_score: 0.5,
            evaluator_score: None,
        }
    }

    fn group(n: usize, source: Source, doc: &str) -> Vec<QAPair> {
        (0..n)
            .map(|i| pair(&format!("{doc}-{i:03}"), source, doc, &format!("What is item {i}?"), &format!("value {i}")))
            .collect()
    }

    #[test]
    fn top_fraction_sizes() {
        let e = ReferenceEvaluator;
        assert_eq!(filter_top_fraction(group(40, Source::Srs, "a"), &e, 0.05).unwrap().len(), 2);
        assert_eq!(filter_top_fraction(group(10, Source::Srs, "a"), &e, 0.05).unwrap().len(), 1);
        let mut both = group(40, Source::Srs, "a");
        both.extend(group(10, Source::Corpus, "wiki"));
        let kept = filter_top_fraction(both, &e, 0.05).unwrap();
        assert_eq!(kept.iter().filter(|p| p.source == Source::Srs).count(), 2);
        assert_eq!(kept.iter().filter(|p| p.source == Source::Corpus).count(), 1);
        assert!(matches!(filter_top_fraction(vec![], &e, 0.0), Err(QgenError::InvalidFraction(_))));
        assert!(matches!(filter_top_fraction(vec![], &e, 1.5), Err(QgenError::InvalidFraction(_))));
    }

    #[test]
    fn filter_prefers_well_formed_questions() {
        let mut g = group(20, Source::Srs, "a");
        for p in g.iter_mut().skip(1) {
            p.question = p.question.trim_end_matches('?').to_string();
        }
        let kept = filter_top_fraction(g, &ReferenceEvaluator, 0.05).unwrap();
        assert_eq!(kept[0].id, "a-000");
    }

    #[test]
    fn duplicates_removed_before_filtering() {
        let mut g = group(20, Source::Srs, "a");
        let dup = g[0].clone();
        g.push(QAPair { id: "dup".into(), ..dup });
        let kept = filter_top_fraction(g, &ReferenceEvaluator, 1.0).unwrap();
        assert_eq!(kept.len(), 20);
    }

    fn label(id: &str, q: QuestionLabel, a: AnswerLabel) -> Annotation {
        Annotation {
            pair_id: id.into(),
            question_label: q,
            rephrased_question: None,
            answer_label: a,
            corrected_answer: None,
        }
    }

    #[test]
    fn validation_keeps_valid_pairs_unchanged() {
        let g = group(5, Source::Srs, "a");
        let ann: Vec<_> = g.iter().map(|p| label(&p.id, QuestionLabel::Valid, AnswerLabel::Correct)).collect();
        let out = apply_validation(g.clone(), &ann, vec![]).unwrap();
        assert_eq!(out.len(), 5);
        for (a, b) in out.iter().zip(&g) {
            assert_eq!((&a.question, &a.answer), (&b.question, &b.answer));
        }
    }

    #[test]
    fn corrected_answer_is_stored() {
        let g = vec![pair("p1", Source::Srs, "a", "What does the tool produce?", "software code")];
        let ann = vec![Annotation {
            corrected_answer: Some("implemented software code".into()),
            ..label("p1", QuestionLabel::Valid, AnswerLabel::Corrected)
        }];
        let out = apply_validation(g, &ann, vec![]).unwrap();
        assert_eq!(out[0].answer, "implemented software code");
        assert_eq!(out[0].answer_label, AnswerLabel::Corrected);
    }

    #[test]
    fn invalid_pairs_are_dropped() {
        let g = group(204, Source::Srs, "a");
        let ann: Vec<_> = g
            .iter()
            .enumerate()
            .map(|(i, p)| match i {
                0..=10 => label(&p.id, QuestionLabel::Invalid, AnswerLabel::Correct),
                11..=20 => label(&p.id, QuestionLabel::Valid, AnswerLabel::Invalid),
                21..=30 => label(&p.id, QuestionLabel::Rephrased, AnswerLabel::NotInContext),
                _ => label(&p.id, QuestionLabel::Valid, AnswerLabel::Correct),
            })
            .collect();
        let dropped = ann
            .iter()
            .filter(|a| {
                a.question_label == QuestionLabel::Invalid
                    || matches!(a.answer_label, AnswerLabel::Invalid | AnswerLabel::NotInContext)
            })
            .count();
        assert_eq!(dropped, 31);
        let out = apply_validation(g, &ann, vec![]).unwrap();
        assert_eq!(out.len(), 173);
        assert!(out.iter().all(|p| p.question_label != QuestionLabel::Invalid));
    }

    #[test]
    fn unknown_ids_are_listed() {
        let g = group(2, Source::Srs, "a");
        let ann = vec![
            label("zz", QuestionLabel::Valid, AnswerLabel::Correct),
            label("yy", QuestionLabel::Valid, AnswerLabel::Correct),
        ];
        match apply_validation(g, &ann, vec![]).unwrap_err() {
            QgenError::UnknownPairIds(ids) => assert_eq!(ids, ["yy", "zz"]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn manual_pairs_merged() {
        let g = group(2, Source::Srs, "a");
        let m = pair("m1", Source::Corpus, "Wet_mass", "What is wet mass?", "total mass");
        let out = apply_validation(g.clone(), &[], vec![m.clone()]).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[2].origin, Origin::Manual);
        assert!(matches!(
            apply_validation(g.clone(), &[], vec![g[0].clone()]),
            Err(QgenError::DuplicatePairId(_))
        ));
    }

    #[test]
    fn bleu_examples() {
        assert_eq!(simplified_bleu("what is wet mass", "what is wet mass").unwrap(), 1.0);
        assert_eq!(simplified_bleu("wet mass", "star tracker").unwrap(), 0.0);
        assert!((simplified_bleu("what is wet mass", "what is the wet mass").unwrap() - 8.0 / 9.0).abs() < 1e-12);
        assert!(matches!(simplified_bleu("", "x"), Err(QgenError::EmptyInput)));
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let g = group(3, Source::Corpus, "wiki");
        write_dataset(&path, &g).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), g);
        let row = r#"{"id":"x","domain":"d","source":"srs","doc_id":"s","passage_id":"s#0000","passage_text":"t","question":"q?","answer":"t","origin":"man"}"#;
        let parsed = parse_dataset(row.as_bytes()).unwrap();
        assert_eq!(parsed[0].origin, Origin::Manual);
        assert_eq!(parsed[0].question_label, QuestionLabel::Unlabeled);
        let err = parse_dataset("{\n".as_bytes()).unwrap_err();
        assert!(matches!(err, QgenError::Json { line: 1, .. }));
    }

    #[test]
    fn stats_report_rephrase_similarity() {
        let g = vec![pair("p1", Source::Srs, "a", "what is wet mass", "x")];
        let ann = vec![Annotation {
            rephrased_question: Some("what is the wet mass".into()),
            ..label("p1", QuestionLabel::Rephrased, AnswerLabel::Correct)
        }];
        let v = apply_validation(g.clone(), &ann, vec![]).unwrap();
        let s = dataset_stats(&g, &v);
        assert_eq!(s.rephrased, 1);
        assert!((s.mean_rephrase_bleu.unwrap() - 8.0 / 9.0).abs() < 1e-12);
    }
}
