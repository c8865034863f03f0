//! Retrieval and answer metrics, and the experiment driver that runs a
//! dataset through one or more pipeline configurations.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::lexicon;
use crate::pipeline::{Engine, PipelineConfig, PipelineError, PreparedCorpus, PreparedSrs, QAResult, Timings};
use crate::plugin::PluginError;
use crate::qgen::QAPair;
use crate::reader::extract_answer;
use crate::retrieval::{cosine, embed_checked, Corpus, Embedder, Hit, RankedHits};
use crate::textseg::{split_passages, Document, Passage, Source};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Cut-offs reported for every retrieval metric.
pub const REPORT_KS: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no judgments to evaluate")]
    EmptyJudgments,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("semantic matching needs an embedder")]
    MissingEmbedder,
    #[error("{predictions} predictions for {golds} gold answers")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no dataset row could be evaluated")]
    NoRows,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("component failed: {0}")]
    Component(#[from] PluginError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalJudgment {
    pub question_id: String,
    pub gold_item_id: String,
    pub ranked: RankedHits,
}

fn check(n: usize, k: usize) -> Result<(), EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if n == 0 {
        return Err(EvalError::EmptyJudgments);
    }
    Ok(())
}

/// Recall@k over 1-based gold ranks (`None` = not retrieved).
pub fn recall_from_ranks(ranks: &[Option<usize>], k: usize) -> Result<f64, EvalError> {
    check(ranks.len(), k)?;
    let hits = ranks.iter().filter(|r| r.is_some_and(|r| r <= k)).count();
    Ok(hits as f64 / ranks.len() as f64)
}

/// nDCG@k with a single relevant item: `1 / log2(rank + 1)` inside the
/// cut-off, 0 outside; the ideal DCG is 1.
pub fn ndcg_from_ranks(ranks: &[Option<usize>], k: usize) -> Result<f64, EvalError> {
    check(ranks.len(), k)?;
    let sum: f64 = ranks
        .iter()
        .map(|r| match r {
            Some(r) if *r <= k => 1.0 / ((*r + 1) as f64).log2(),
            _ => 0.0,
        })
        .sum();
    Ok(sum / ranks.len() as f64)
}

fn ranks(judgments: &[RetrievalJudgment]) -> Vec<Option<usize>> {
    judgments.iter().map(|j| j.ranked.rank_of(&j.gold_item_id)).collect()
}

pub fn recall_at_k(judgments: &[RetrievalJudgment], k: usize) -> Result<f64, EvalError> {
    recall_from_ranks(&ranks(judgments), k)
}

pub fn ndcg_at_k(judgments: &[RetrievalJudgment], k: usize) -> Result<f64, EvalError> {
    ndcg_from_ranks(&ranks(judgments), k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Exact,
    Partial,
    Semantic,
}

impl MatchMode {
    pub const ALL: [MatchMode; 3] = [MatchMode::Exact, MatchMode::Partial, MatchMode::Semantic];
}

/// Cosine above which a semantic match counts as correct.
pub const SEMANTIC_THRESHOLD: f64 = 0.5;

/// Lowercased, whitespace collapsed, non-alphanumerics trimmed from both ends.
pub fn normalize_answer(s: &str) -> String {
    let lower = s.to_lowercase();
    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_matches(|c: char| !c.is_alphanumeric()).to_string()
}

/// Tokens answer metrics compare: content words, or every word when the
/// string has no content word at all (so an answer like "none" or "all"
/// still has something to match).
pub fn answer_tokens(s: &str) -> Vec<String> {
    let all = lexicon::words(&s.to_lowercase());
    let content: Vec<String> = all.iter().filter(|w| !lexicon::is_stopword(w)).cloned().collect();
    if content.is_empty() {
        all
    } else {
        content
    }
}

/// Multiset token F1 between prediction and gold over [`answer_tokens`].
pub fn token_f1(pred: &str, gold: &str) -> f64 {
    let p = answer_tokens(pred);
    let g = answer_tokens(gold);
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    lexicon::overlap_f1(&p, &g)
}

pub fn is_correct(pred: &str, gold: &str, mode: MatchMode, embedder: Option<&dyn Embedder>) -> Result<bool, EvalError> {
    Ok(match mode {
        MatchMode::Exact => {
            let p = normalize_answer(pred);
            !p.is_empty() && p == normalize_answer(gold)
        }
        MatchMode::Partial => lexicon::multiset_overlap(&answer_tokens(pred), &answer_tokens(gold)) > 0,
        MatchMode::Semantic => {
            let e = embedder.ok_or(EvalError::MissingEmbedder)?;
            if pred.trim().is_empty() || gold.trim().is_empty() {
                return Ok(false);
            }
            let a = embed_checked(e, pred).map_err(component)?;
            let b = embed_checked(e, gold).map_err(component)?;
            cosine(&a, &b) > SEMANTIC_THRESHOLD
        }
    })
}

fn component(e: crate::retrieval::RetrievalError) -> EvalError {
    match e {
        crate::retrieval::RetrievalError::Component(p) => EvalError::Component(p),
        other => EvalError::Component(PluginError::Component(other.to_string())),
    }
}

/// Share of predictions judged correct under `mode`.
pub fn answer_accuracy(
    predictions: &[String],
    golds: &[String],
    mode: MatchMode,
    embedder: Option<&dyn Embedder>,
) -> Result<f64, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::EmptyJudgments);
    }
    if mode == MatchMode::Semantic && embedder.is_none() {
        return Err(EvalError::MissingEmbedder);
    }
    let mut correct = 0;
    for (p, g) in predictions.iter().zip(golds) {
        if is_correct(p, g, mode, embedder)? {
            correct += 1;
        }
    }
    Ok(correct as f64 / golds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub judgments: usize,
    pub recall: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
}

impl RetrievalMetrics {
    fn from_ranks(ranks: &[Option<usize>]) -> Option<Self> {
        if ranks.is_empty() {
            return None;
        }
        let mut m = RetrievalMetrics {
            judgments: ranks.len(),
            ..Self::default()
        };
        for k in REPORT_KS {
            m.recall.insert(k, recall_from_ranks(ranks, k).ok()?);
            m.ndcg.insert(k, ndcg_from_ranks(ranks, k).ok()?);
        }
        Some(m)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerMetrics {
    pub questions: usize,
    pub exact: f64,
    pub partial: f64,
    pub semantic: f64,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScopeMetrics {
    pub questions: usize,
    /// Corpus-side questions: rank of the gold document.
    pub document: Option<RetrievalMetrics>,
    pub srs_passages: Option<RetrievalMetrics>,
    pub corpus_passages: Option<RetrievalMetrics>,
    /// The reader applied to the gold passage.
    pub reader: AnswerMetrics,
    /// The answer of the top-ranked passage on the question's own side.
    pub end_to_end: AnswerMetrics,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub max_ms: f64,
}

impl StepStats {
    fn of(mut xs: Vec<f64>) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        let median = if n % 2 == 1 { xs[n / 2] } else { (xs[n / 2 - 1] + xs[n / 2]) / 2.0 };
        Self {
            mean_ms: xs.iter().sum::<f64>() / n as f64,
            median_ms: median,
            max_ms: xs[n - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub document_retrieval: StepStats,
    pub splitting: StepStats,
    pub passage_retrieval: StepStats,
    pub answer_extraction: StepStats,
    pub total: StepStats,
}

impl TimingStats {
    fn of(ts: &[Timings]) -> Self {
        let col = |f: fn(&Timings) -> f64| StepStats::of(ts.iter().map(f).collect());
        Self {
            document_retrieval: col(|t| t.document_retrieval_ms),
            splitting: col(|t| t.splitting_ms),
            passage_retrieval: col(|t| t.passage_retrieval_ms),
            answer_extraction: col(|t| t.answer_extraction_ms),
            total: col(|t| t.total_ms),
        }
    }
}

/// Per-question outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOutcome {
    pub id: String,
    pub domain: String,
    pub source: Source,
    pub gold_passage_id: String,
    /// Gold document rank; only judged for corpus-side questions.
    pub document_judged: bool,
    pub document_rank: Option<usize>,
    pub passage_rank: Option<usize>,
    pub gold: String,
    pub reader_answer: String,
    pub end_to_end_answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub config: PipelineConfig,
    pub overall: ScopeMetrics,
    pub per_domain: BTreeMap<String, ScopeMetrics>,
    pub timings: TimingStats,
    pub rows: Vec<RowOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedRow {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub ks: Vec<usize>,
    pub runs: Vec<RunReport>,
    pub excluded: Vec<ExcludedRow>,
}

/// The sources a dataset is evaluated against.
#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    /// SRS documents by id.
    pub srs: HashMap<String, Document>,
    /// Domain corpora by domain name.
    pub corpora: HashMap<String, Corpus>,
}

struct Prepared {
    srs: HashMap<String, PreparedSrs>,
    corpora: HashMap<String, PreparedCorpus>,
    /// (doc id, passage id) -> passage for corpus documents, split per document.
    corpus_passages: HashMap<String, Vec<Passage>>,
}

fn find_passage<'a>(passages: &'a [Passage], pair: &QAPair) -> Option<&'a Passage> {
    passages
        .iter()
        .find(|p| p.id == pair.passage_id)
        .or_else(|| passages.iter().find(|p| p.text == pair.passage_text))
}

fn hits_ranking(question_id: &str, r: &QAResult, source: Source) -> RankedHits {
    let hits = match source {
        Source::Srs => &r.srs_hits,
        Source::Corpus => &r.corpus_hits,
    };
    RankedHits {
        query_id: question_id.to_string(),
        hits: hits
            .iter()
            .map(|h| Hit {
                item_id: h.passage.id.clone(),
                score: h.score,
            })
            .collect(),
    }
}

fn eval_row(engine: &Engine, pair: &QAPair, prep: &Prepared) -> Result<(RowOutcome, Timings), String> {
    let depth = engine.config.k.max(*REPORT_KS.last().expect("non-empty"));
    let rankers = engine.components.rankers();
    let (srs, corpus, gold_passage, document_rank) = match pair.source {
        Source::Srs => {
            let srs = prep.srs.get(&pair.doc_id).ok_or_else(|| format!("SRS `{}` not provided", pair.doc_id))?;
            let gold = find_passage(&srs.passages, pair).ok_or_else(|| format!("passage `{}` not found", pair.passage_id))?;
            let corpus = prep.corpora.get(&pair.domain);
            (srs, corpus, gold.clone(), None)
        }
        Source::Corpus => {
            let corpus = prep
                .corpora
                .get(&pair.domain)
                .ok_or_else(|| format!("corpus for domain `{}` not provided", pair.domain))?;
            let passages = prep
                .corpus_passages
                .get(&pair.doc_id)
                .ok_or_else(|| format!("document `{}` not in the `{}` corpus", pair.doc_id, pair.domain))?;
            let gold = find_passage(passages, pair).ok_or_else(|| format!("passage `{}` not found", pair.passage_id))?;
            // the SRS side still needs a document; any SRS of the domain works, else the first
            let srs = prep
                .srs
                .values()
                .find(|s| s.doc_id == pair.doc_id)
                .or_else(|| {
                    let mut ids: Vec<&String> = prep.srs.keys().collect();
                    ids.sort();
                    ids.first().and_then(|id| prep.srs.get(*id))
                })
                .ok_or_else(|| "no SRS provided".to_string())?;
            let index = corpus.index.as_ref().ok_or_else(|| "empty corpus".to_string())?;
            let ranked = index.rank(&pair.question, rankers).map_err(|e| e.to_string())?;
            (srs, Some(corpus), gold.clone(), Some(ranked.rank_of(&pair.doc_id)))
        }
    };
    let empty;
    let corpus = match corpus {
        Some(c) => c,
        None => {
            empty = engine
                .prepare_corpus(Corpus {
                    domain: pair.domain.clone(),
                    documents: Vec::new(),
                })
                .map_err(|e| e.to_string())?;
            &empty
        }
    };
    let result = engine
        .ask_prepared(&pair.question, srs, corpus, Some(depth))
        .map_err(|e| e.to_string())?;
    let ranking = hits_ranking(&pair.id, &result, pair.source);
    let passage_rank = ranking.rank_of(&gold_passage.id);
    let side = match pair.source {
        Source::Srs => &result.srs_hits,
        Source::Corpus => &result.corpus_hits,
    };
    let reader_answer = match side.iter().find(|h| h.passage.id == gold_passage.id) {
        Some(h) => h.answer.as_ref().map(|a| a.text.clone()).unwrap_or_default(),
        None => extract_answer(engine.components.reader.as_ref(), &pair.question, &gold_passage)
            .ok()
            .flatten()
            .map(|a| a.text)
            .unwrap_or_default(),
    };
    let end_to_end_answer = side
        .first()
        .and_then(|h| h.answer.as_ref())
        .map(|a| a.text.clone())
        .unwrap_or_default();
    let row = RowOutcome {
        id: pair.id.clone(),
        domain: pair.domain.clone(),
        source: pair.source,
        gold_passage_id: gold_passage.id.clone(),
        document_judged: document_rank.is_some(),
        document_rank: document_rank.flatten(),
        passage_rank,
        gold: pair.answer.clone(),
        reader_answer,
        end_to_end_answer,
    };
    Ok((row, result.timings))
}

fn answer_metrics(rows: &[&RowOutcome], pick: fn(&RowOutcome) -> &str, embedder: &dyn Embedder) -> Result<AnswerMetrics, EvalError> {
    if rows.is_empty() {
        return Ok(AnswerMetrics::default());
    }
    let preds: Vec<String> = rows.iter().map(|r| pick(r).to_string()).collect();
    let golds: Vec<String> = rows.iter().map(|r| r.gold.clone()).collect();
    Ok(AnswerMetrics {
        questions: rows.len(),
        exact: answer_accuracy(&preds, &golds, MatchMode::Exact, None)?,
        partial: answer_accuracy(&preds, &golds, MatchMode::Partial, None)?,
        semantic: answer_accuracy(&preds, &golds, MatchMode::Semantic, Some(embedder))?,
        mean_f1: preds.iter().zip(&golds).map(|(p, g)| token_f1(p, g)).sum::<f64>() / rows.len() as f64,
    })
}

fn scope_metrics(rows: &[&RowOutcome], embedder: &dyn Embedder) -> Result<ScopeMetrics, EvalError> {
    let doc_ranks: Vec<Option<usize>> = rows.iter().filter(|r| r.document_judged).map(|r| r.document_rank).collect();
    let side = |s: Source| -> Vec<Option<usize>> {
        rows.iter().filter(|r| r.source == s).map(|r| r.passage_rank).collect()
    };
    Ok(ScopeMetrics {
        questions: rows.len(),
        document: RetrievalMetrics::from_ranks(&doc_ranks),
        srs_passages: RetrievalMetrics::from_ranks(&side(Source::Srs)),
        corpus_passages: RetrievalMetrics::from_ranks(&side(Source::Corpus)),
        reader: answer_metrics(rows, |r| &r.reader_answer, embedder)?,
        end_to_end: answer_metrics(rows, |r| &r.end_to_end_answer, embedder)?,
    })
}

fn prepare(engine: &Engine, inputs: &EvalInputs) -> Result<Prepared, EvalError> {
    let mut srs = HashMap::new();
    for (id, doc) in &inputs.srs {
        srs.insert(id.clone(), engine.prepare_srs(doc)?);
    }
    let split = engine.config.split_config();
    let mut corpora = HashMap::new();
    let mut corpus_passages = HashMap::new();
    for (domain, corpus) in &inputs.corpora {
        for d in &corpus.documents {
            corpus_passages.insert(
                d.id.clone(),
                split_passages(&Document::from_plain_text(&d.id, &d.text), Source::Corpus, &split),
            );
        }
        corpora.insert(domain.clone(), engine.prepare_corpus(corpus.clone())?);
    }
    Ok(Prepared {
        srs,
        corpora,
        corpus_passages,
    })
}

fn run_one(spec: &ExperimentSpec, dataset: &[QAPair], inputs: &EvalInputs) -> Result<(RunReport, Vec<ExcludedRow>), EvalError> {
    let engine = Engine::from_config(spec.config.clone())?;
    let prep = prepare(&engine, inputs)?;
    let workers = if engine.components.concurrency_safe() {
        std::thread::available_parallelism().map_or(1, |n| n.get()).min(dataset.len().max(1))
    } else {
        1
    };
    let chunk = dataset.len().div_ceil(workers).max(1);
    let outcomes: Vec<Result<(RowOutcome, Timings), String>> = std::thread::scope(|s| {
        let handles: Vec<_> = dataset
            .chunks(chunk)
            .map(|rows| {
                let (engine, prep) = (&engine, &prep);
                s.spawn(move || rows.iter().map(|p| eval_row(engine, p, prep)).collect::<Vec<_>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation thread panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut excluded = Vec::new();
    for (pair, outcome) in dataset.iter().zip(outcomes) {
        match outcome {
            Ok((r, t)) => {
                rows.push(r);
                timings.push(t);
            }
            Err(reason) => {
                tracing::warn!(id = %pair.id, %reason, "dataset row excluded");
                excluded.push(ExcludedRow {
                    id: pair.id.clone(),
                    reason,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(EvalError::NoRows);
    }
    let embedder = engine.components.embedder.as_ref();
    let all: Vec<&RowOutcome> = rows.iter().collect();
    let overall = scope_metrics(&all, embedder)?;
    let mut by_domain: BTreeMap<String, Vec<&RowOutcome>> = BTreeMap::new();
    for r in &rows {
        by_domain.entry(r.domain.clone()).or_default().push(r);
    }
    let mut per_domain = BTreeMap::new();
    for (d, rs) in by_domain {
        per_domain.insert(d, scope_metrics(&rs, embedder)?);
    }
    let timings = TimingStats::of(&timings);
    Ok((
        RunReport {
            name: spec.name.clone(),
            config: spec.config.clone(),
            overall,
            per_domain,
            timings,
            rows,
        },
        excluded,
    ))
}

/// Evaluates `dataset` under every configuration of `matrix`. Rows whose
/// document or passage cannot be found are excluded and listed.
pub fn run_experiment(dataset: &[QAPair], inputs: &EvalInputs, matrix: &[ExperimentSpec]) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::NoRows);
    }
    let mut runs = Vec::new();
    let mut excluded: BTreeMap<String, String> = BTreeMap::new();
    for spec in matrix {
        let (run, ex) = run_one(spec, dataset, inputs)?;
        for e in ex {
            excluded.entry(e.id).or_insert(e.reason);
        }
        runs.push(run);
    }
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        ks: REPORT_KS.to_vec(),
        runs,
        excluded: excluded.into_iter().map(|(id, reason)| ExcludedRow { id, reason }).collect(),
    })
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn table_rows(report: &EvalReport) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for run in &report.runs {
        let scopes = std::iter::once(("overall".to_string(), &run.overall))
            .chain(run.per_domain.iter().map(|(d, m)| (d.clone(), m)));
        for (scope, m) in scopes {
            for (target, r) in [
                ("document", &m.document),
                ("srs_passage", &m.srs_passages),
                ("corpus_passage", &m.corpus_passages),
            ] {
                if let Some(r) = r {
                    let mut row = vec![run.name.clone(), scope.clone(), target.to_string(), r.judgments.to_string()];
                    row.extend(REPORT_KS.iter().map(|k| pct(r.recall[k])));
                    row.extend(REPORT_KS.iter().map(|k| pct(r.ndcg[k])));
                    row.extend(std::iter::repeat_n(String::new(), 4));
                    out.push(row);
                }
            }
            for (target, a) in [("reader", &m.reader), ("end_to_end", &m.end_to_end)] {
                let mut row = vec![run.name.clone(), scope.clone(), target.to_string(), a.questions.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 2 * REPORT_KS.len()));
                row.extend([pct(a.exact), pct(a.partial), pct(a.semantic), pct(a.mean_f1)]);
                out.push(row);
            }
        }
    }
    out
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["run", "scope", "target", "n"].iter().map(|s| s.to_string()).collect();
    h.extend(REPORT_KS.iter().map(|k| format!("R@{k}")));
    h.extend(REPORT_KS.iter().map(|k| format!("nDCG@{k}")));
    h.extend(["exact", "partial", "semantic", "F1"].iter().map(|s| s.to_string()));
    h
}

/// Plain-text table; metrics as percentages.
pub fn render_table(report: &EvalReport) -> String {
    let mut rows = vec![header()];
    rows.extend(table_rows(report));
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    for run in &report.runs {
        let t = &run.timings;
        let _ = writeln!(
            out,
            "\n{} timings (mean ms): document {:.2}, splitting {:.2}, passages {:.2}, reader {:.2}, total {:.2}",
            run.name,
            t.document_retrieval.mean_ms,
            t.splitting.mean_ms,
            t.passage_retrieval.mean_ms,
            t.answer_extraction.mean_ms,
            t.total.mean_ms
        );
    }
    if !report.excluded.is_empty() {
        let _ = writeln!(out, "\n{} row(s) excluded:", report.excluded.len());
        for e in &report.excluded {
            let _ = writeln!(out, "  {}: {}", e.id, e.reason);
        }
    }
    out
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One CSV line per (run, scope, target); metrics as percentages.
pub fn render_csv(report: &EvalReport) -> String {
    let mut out = String::new();
    for r in std::iter::once(header()).chain(table_rows(report)) {
        let _ = writeln!(out, "{}", r.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(","));
    }
    out
}
