//! End-to-end question answering over an SRS and a domain corpus.
//!
//! Step 1 retrieves the top `c` corpus documents, step 2 splits them (the SRS
//! is split once up front), step 3 ranks passages on each side separately and
//! step 4 runs the reader on every retrieved passage. The two sources are
//! never merged: the result carries one hit list per source.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{build_corpus, ArticleFetcher, AssembleOptions};
use crate::reader::{extract_answer, AnswerSpan, PluginReader, Reader, ReferenceReader};
use crate::retrieval::{
    CrossScorer, Corpus, Embedder, HashingEmbedder, Index, Item, OverlapScorer, PluginCrossScorer, PluginEmbedder,
    Rankers, RetrievalError, RetrieverKind, RetrieverOptions,
};
use crate::plugin::PluginSpec;
use crate::textseg::{split_passages, Document, Passage, Source, SplitConfig};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("the SRS has no text")]
    EmptySrs,
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderPlugin {
    pub name: String,
    #[serde(default)]
    pub max_tokens: Option<usize>,
    #[serde(flatten)]
    pub spec: PluginSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderPlugin {
    pub name: String,
    pub dimension: usize,
    #[serde(flatten)]
    pub spec: PluginSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerPlugin {
    pub name: String,
    #[serde(flatten)]
    pub spec: PluginSpec,
}

/// Model components; `None` selects the built-in reference implementation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentConfig {
    #[serde(default)]
    pub reader: Option<ReaderPlugin>,
    #[serde(default)]
    pub embedder: Option<EmbedderPlugin>,
    #[serde(default)]
    pub cross_scorer: Option<ScorerPlugin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Passages returned per source.
    pub k: usize,
    /// Corpus documents retrieved in step 1.
    pub c: usize,
    pub document_retriever: RetrieverOptions,
    pub passage_retriever: RetrieverOptions,
    pub token_budget: usize,
    pub components: ComponentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 3,
            c: 1,
            document_retriever: RetrieverOptions::new(RetrieverKind::Bm25),
            passage_retriever: RetrieverOptions::new(RetrieverKind::Rerank),
            token_budget: 512,
            components: ComponentConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k == 0 {
            return Err(PipelineError::InvalidConfig("k must be at least 1".into()));
        }
        if self.c == 0 {
            return Err(PipelineError::InvalidConfig("c must be at least 1".into()));
        }
        if self.token_budget == 0 {
            return Err(PipelineError::InvalidConfig("token_budget must be at least 1".into()));
        }
        for opts in [&self.document_retriever, &self.passage_retriever] {
            opts.bm25.validate().map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
            if opts.rerank_depth == 0 {
                return Err(PipelineError::InvalidConfig("rerank_depth must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            token_budget: self.token_budget,
            ..SplitConfig::default()
        }
    }
}

#[derive(Clone)]
pub struct Components {
    pub reader: Arc<dyn Reader>,
    pub embedder: Arc<dyn Embedder>,
    pub scorer: Arc<dyn CrossScorer>,
}

impl Components {
    pub fn reference() -> Self {
        Self {
            reader: Arc::new(ReferenceReader::default()),
            embedder: Arc::new(HashingEmbedder::default()),
            scorer: Arc::new(OverlapScorer),
        }
    }

    pub fn from_config(config: &ComponentConfig) -> Self {
        let reference = Self::reference();
        Self {
            reader: match &config.reader {
                Some(p) => Arc::new(PluginReader::new(&p.name, p.max_tokens, p.spec.clone())),
                None => reference.reader,
            },
            embedder: match &config.embedder {
                Some(p) => Arc::new(PluginEmbedder::new(&p.name, p.dimension, p.spec.clone())),
                None => reference.embedder,
            },
            scorer: match &config.cross_scorer {
                Some(p) => Arc::new(PluginCrossScorer::new(&p.name, p.spec.clone())),
                None => reference.scorer,
            },
        }
    }

    pub fn rankers(&self) -> Rankers<'_> {
        Rankers {
            embedder: self.embedder.as_ref(),
            scorer: self.scorer.as_ref(),
        }
    }

    /// Whether the SRS and corpus branches may run on separate threads.
    pub fn concurrency_safe(&self) -> bool {
        self.reader.concurrency_safe() && self.embedder.concurrency_safe() && self.scorer.concurrency_safe()
    }
}

impl std::fmt::Debug for Components {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Components")
            .field("reader", &self.reader.name())
            .field("embedder", &self.embedder.name())
            .field("scorer", &self.scorer.name())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAHit {
    /// 1-based retrieval rank within its source.
    pub rank: usize,
    pub score: f64,
    pub passage: Passage,
    pub answer: Option<AnswerSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Wall-clock milliseconds per step. Branch steps are summed over both
/// sources.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub document_retrieval_ms: f64,
    pub splitting_ms: f64,
    pub passage_retrieval_ms: f64,
    pub answer_extraction_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAResult {
    pub question: String,
    pub srs_hits: Vec<QAHit>,
    pub corpus_hits: Vec<QAHit>,
    pub retrieved_doc_ids: Vec<String>,
    pub timings: Timings,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// No corpus was available; only the SRS side was searched.
    #[serde(default)]
    pub corpus_missing: bool,
}

/// The SRS split into passages plus its passage index.
#[derive(Debug, Clone)]
pub struct PreparedSrs {
    pub doc_id: String,
    pub passages: Vec<Passage>,
    pub index: Index,
    pub split_ms: f64,
}

impl PreparedSrs {
    pub fn passage(&self, id: &str) -> Option<&Passage> {
        self.passages.iter().find(|p| p.id == id)
    }
}

type SplitCache = Mutex<HashMap<Vec<String>, Arc<(Vec<Passage>, Index)>>>;

/// A corpus with its document index and a cache of split, indexed
/// document selections.
#[derive(Debug)]
pub struct PreparedCorpus {
    pub corpus: Corpus,
    pub index: Option<Index>,
    splits: SplitCache,
}

impl PreparedCorpus {
    /// Pairs a corpus with a document index built earlier, e.g. one loaded
    /// from disk. The index must cover exactly the corpus documents.
    pub fn from_parts(corpus: Corpus, index: Option<Index>) -> Result<Self, PipelineError> {
        corpus.validate()?;
        let indexed = index.as_ref().map_or(0, Index::len);
        if indexed != corpus.size() {
            return Err(PipelineError::InvalidConfig(format!(
                "document index covers {indexed} items but the corpus has {}",
                corpus.size()
            )));
        }
        Ok(Self {
            corpus,
            index,
            splits: Mutex::new(HashMap::new()),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_none()
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

struct Branch {
    hits: Vec<QAHit>,
    retrieval_ms: f64,
    reading_ms: f64,
    warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    pub config: PipelineConfig,
    pub components: Components,
}

impl Engine {
    pub fn new(config: PipelineConfig, components: Components) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self { config, components })
    }

    pub fn from_config(config: PipelineConfig) -> Result<Self, PipelineError> {
        let components = Components::from_config(&config.components);
        Self::new(config, components)
    }

    pub fn prepare_srs(&self, srs: &Document) -> Result<PreparedSrs, PipelineError> {
        if srs.is_empty() {
            return Err(PipelineError::EmptySrs);
        }
        let t = Instant::now();
        let passages = split_passages(srs, Source::Srs, &self.config.split_config());
        let split_ms = ms(t);
        if passages.is_empty() {
            return Err(PipelineError::EmptySrs);
        }
        let items: Vec<Item> = passages.iter().map(Item::from).collect();
        let index = Index::build(&items, &self.config.passage_retriever, self.components.embedder.as_ref())?;
        Ok(PreparedSrs {
            doc_id: srs.id.clone(),
            passages,
            index,
            split_ms,
        })
    }

    pub fn prepare_corpus(&self, corpus: Corpus) -> Result<PreparedCorpus, PipelineError> {
        corpus.validate()?;
        let index = if corpus.is_empty() {
            None
        } else {
            Some(Index::build(
                &corpus.items(),
                &self.config.document_retriever,
                self.components.embedder.as_ref(),
            )?)
        };
        Ok(PreparedCorpus {
            corpus,
            index,
            splits: Mutex::new(HashMap::new()),
        })
    }

    /// Passages of the selected documents, split per document and
    /// concatenated in rank order, plus their passage index.
    fn corpus_passages(
        &self,
        corpus: &PreparedCorpus,
        doc_ids: &[String],
    ) -> Result<Arc<(Vec<Passage>, Index)>, PipelineError> {
        if let Some(hit) = corpus.splits.lock().unwrap_or_else(|p| p.into_inner()).get(doc_ids) {
            return Ok(hit.clone());
        }
        let split = self.config.split_config();
        let mut passages = Vec::new();
        for id in doc_ids {
            if let Some(doc) = corpus.corpus.get(id) {
                passages.extend(split_passages(&Document::from_plain_text(&doc.id, &doc.text), Source::Corpus, &split));
            }
        }
        if passages.is_empty() {
            return Err(PipelineError::Retrieval(RetrievalError::EmptyCollection));
        }
        let items: Vec<Item> = passages.iter().map(Item::from).collect();
        let index = Index::build(&items, &self.config.passage_retriever, self.components.embedder.as_ref())?;
        let entry = Arc::new((passages, index));
        corpus
            .splits
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(doc_ids.to_vec(), entry.clone());
        Ok(entry)
    }

    fn branch(&self, question: &str, passages: &[Passage], index: &Index, k: usize) -> Result<Branch, PipelineError> {
        let t = Instant::now();
        let ranked = index.top(question, k, self.components.rankers())?;
        let retrieval_ms = ms(t);
        let by_id: HashMap<&str, &Passage> = passages.iter().map(|p| (p.id.as_str(), p)).collect();
        let t = Instant::now();
        let mut warnings = Vec::new();
        let mut hits = Vec::with_capacity(ranked.len());
        for (i, hit) in ranked.hits.iter().enumerate() {
            let passage = by_id[hit.item_id.as_str()];
            let (answer, warning) = match extract_answer(self.components.reader.as_ref(), question, passage) {
                Ok(a) => (a, None),
                Err(e) => {
                    let msg = format!("{}: {e}", passage.id);
                    tracing::warn!(passage = %passage.id, error = %e, "reader failed");
                    warnings.push(msg.clone());
                    (None, Some(msg))
                }
            };
            hits.push(QAHit {
                rank: i + 1,
                score: hit.score,
                passage: passage.clone(),
                answer,
                warning,
            });
        }
        Ok(Branch {
            hits,
            retrieval_ms,
            reading_ms: ms(t),
            warnings,
        })
    }

    /// Answers `question` against prepared sources. `k` overrides the
    /// configured passages per source.
    pub fn ask_prepared(
        &self,
        question: &str,
        srs: &PreparedSrs,
        corpus: &PreparedCorpus,
        k: Option<usize>,
    ) -> Result<QAResult, PipelineError> {
        let total = Instant::now();
        let k = k.unwrap_or(self.config.k);
        if k == 0 {
            return Err(PipelineError::InvalidConfig("k must be at least 1".into()));
        }
        let mut timings = Timings::default();
        let mut warnings = Vec::new();

        let mut retrieved_doc_ids = Vec::new();
        let mut corpus_side = None;
        match &corpus.index {
            None => warnings.push("domain corpus is empty or missing; answering from the SRS only".to_string()),
            Some(index) => {
                let t = Instant::now();
                retrieved_doc_ids = index
                    .top(question, self.config.c, self.components.rankers())?
                    .hits
                    .into_iter()
                    .map(|h| h.item_id)
                    .collect();
                timings.document_retrieval_ms = ms(t);
                let t = Instant::now();
                corpus_side = Some(self.corpus_passages(corpus, &retrieved_doc_ids)?);
                timings.splitting_ms = ms(t);
            }
        }

        let run_srs = || self.branch(question, &srs.passages, &srs.index, k);
        let run_corpus = || {
            corpus_side
                .as_ref()
                .map(|side| self.branch(question, &side.0, &side.1, k))
                .transpose()
        };
        let (srs_branch, corpus_branch) = if self.components.concurrency_safe() && corpus_side.is_some() {
            std::thread::scope(|s| {
                let c = s.spawn(run_corpus);
                let a = run_srs();
                (a, c.join().expect("corpus branch panicked"))
            })
        } else {
            (run_srs(), run_corpus())
        };
        let srs_branch = srs_branch?;
        let corpus_branch = corpus_branch?;

        timings.passage_retrieval_ms = srs_branch.retrieval_ms;
        timings.answer_extraction_ms = srs_branch.reading_ms;
        warnings.extend(srs_branch.warnings);
        let corpus_hits = match corpus_branch {
            Some(b) => {
                timings.passage_retrieval_ms += b.retrieval_ms;
                timings.answer_extraction_ms += b.reading_ms;
                warnings.extend(b.warnings);
                b.hits
            }
            None => Vec::new(),
        };
        timings.total_ms = ms(total);
        Ok(QAResult {
            question: question.to_string(),
            srs_hits: srs_branch.hits,
            corpus_hits,
            retrieved_doc_ids,
            timings,
            warnings,
            corpus_missing: corpus.index.is_none(),
        })
    }

    /// One-shot question: prepares both sources and answers.
    pub fn ask(&self, question: &str, srs: &Document, corpus: &Corpus) -> Result<QAResult, PipelineError> {
        let t = Instant::now();
        let prepared_srs = self.prepare_srs(srs)?;
        let prepared_corpus = self.prepare_corpus(corpus.clone())?;
        let prep_ms = ms(t);
        let mut result = self.ask_prepared(question, &prepared_srs, &prepared_corpus, None)?;
        result.timings.splitting_ms += prepared_srs.split_ms;
        result.timings.total_ms += prep_ms;
        Ok(result)
    }
}

/// Free-function form of [`Engine::ask`] using the configured components.
pub fn ask(question: &str, srs: &Document, corpus: &Corpus, config: &PipelineConfig) -> Result<QAResult, PipelineError> {
    Engine::from_config(config.clone())?.ask(question, srs, corpus)
}

/// Returns `supplied` unchanged, or builds a corpus from the SRS group. A
/// failed build yields an empty corpus and a warning so callers can fall
/// back to SRS-only answering.
pub fn build_domain_corpus_if_absent(
    supplied: Option<Corpus>,
    srs_group: &[Document],
    fetcher: &dyn ArticleFetcher,
    n_keywords: usize,
    options: &AssembleOptions,
) -> (Corpus, Vec<String>) {
    if let Some(c) = supplied {
        return (c, Vec::new());
    }
    match build_corpus(srs_group, fetcher, n_keywords, options) {
        Ok(report) => {
            let warnings = report
                .failures
                .iter()
                .map(|(k, e)| format!("keyword `{k}`: {e}"))
                .collect();
            (report.corpus, warnings)
        }
        Err(e) => (
            Corpus {
                domain: options.domain.clone(),
                documents: Vec::new(),
            },
            vec![format!("corpus construction failed: {e}")],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, CorpusError, FixtureFetcher};
    use crate::plugin::PluginError;
    use crate::reader::SpanPrediction;
    use crate::retrieval::CorpusDocument;

    fn empty_corpus() -> Corpus {
        Corpus {
            domain: "space".into(),
            documents: Vec::new(),
        }
    }

    fn wet_mass_corpus() -> Corpus {
        Corpus {
            domain: "space".into(),
            documents: vec![
                CorpusDocument {
                    id: "Wet_mass".into(),
                    title: "Wet mass".into(),
                    text: "In spaceflight, the wet mass of a spacecraft is its total mass including propellant.\n\n\
                           The difference between the wet mass of a spacecraft and its dry mass is the mass of the \
                           propellant carried on board."
                        .into(),
                    keywords: vec![],
                },
                CorpusDocument {
                    id: "Star_tracker".into(),
                    title: "Star tracker".into(),
                    text: "A star tracker is an optical device that measures the positions of stars to determine \
                           attitude."
                        .into(),
                    keywords: vec![],
                },
            ],
        }
    }

    fn srs() -> Document {
        Document::from_plain_text(
            "srs",
            "DR-13 The spacecraft wet mass shall not exceed 3004 kg.\n\n\
             DR-14 The star tracker shall report attitude at 10 Hz.\n\n\
             DR-15 The navigation camera shall capture images of the landing site.",
        )
    }

    fn engine() -> Engine {
        Engine::new(PipelineConfig::default(), Components::reference()).unwrap()
    }

    #[test]
    fn verbatim_question_with_empty_corpus() {
        let doc = Document::from_plain_text("s", "The star tracker shall report attitude.");
        let r = engine().ask("The star tracker shall report attitude.", &doc, &empty_corpus()).unwrap();
        assert_eq!(r.srs_hits.len(), 1);
        assert_eq!(r.srs_hits[0].rank, 1);
        assert_eq!(r.srs_hits[0].passage.id, "s#0000");
        assert!(r.srs_hits[0].answer.is_some());
        assert!(r.corpus_hits.is_empty());
        assert!(r.corpus_missing);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn definition_question_is_answered_from_the_corpus() {
        let r = engine().ask("What is wet mass?", &srs(), &wet_mass_corpus()).unwrap();
        assert_eq!(r.retrieved_doc_ids, ["Wet_mass"]);
        let texts: Vec<&str> = r.corpus_hits.iter().map(|h| h.passage.text.as_str()).collect();
        assert!(texts.iter().any(|t| t.contains("difference between the wet mass")), "{texts:?}");
        assert!(r.corpus_hits.iter().all(|h| h.passage.source == Source::Corpus));
        assert!(r.srs_hits.iter().all(|h| h.passage.source == Source::Srs));
    }

    #[test]
    fn sources_stay_separate_and_bounded() {
        let e = engine();
        let s = e.prepare_srs(&srs()).unwrap();
        let c = e.prepare_corpus(wet_mass_corpus()).unwrap();
        for k in 1..=5 {
            let r = e.ask_prepared("What mass shall the spacecraft not exceed?", &s, &c, Some(k)).unwrap();
            assert!(r.srs_hits.len() <= k && r.corpus_hits.len() <= k);
            assert!(r.srs_hits.iter().all(|h| h.passage.doc_id == "srs"));
            assert!(r.corpus_hits.iter().all(|h| r.retrieved_doc_ids.contains(&h.passage.doc_id)));
        }
        let r = e.ask_prepared("What mass shall the spacecraft not exceed?", &s, &c, Some(3)).unwrap();
        assert_eq!(r.srs_hits[0].passage.id, "srs#0000");
        assert_eq!(r.srs_hits[0].answer.as_ref().unwrap().text, "3004 kg");
    }

    #[test]
    fn k_monotone_prefix() {
        let e = engine();
        let s = e.prepare_srs(&srs()).unwrap();
        let c = e.prepare_corpus(wet_mass_corpus()).unwrap();
        let ids = |k| {
            let r = e.ask_prepared("star tracker attitude", &s, &c, Some(k)).unwrap();
            r.srs_hits.into_iter().map(|h| h.passage.id).collect::<Vec<_>>()
        };
        for k in 2..=4 {
            let (a, b) = (ids(k - 1), ids(k));
            assert_eq!(&b[..a.len()], &a[..]);
        }
    }

    #[test]
    fn c_above_one_concatenates_in_rank_order() {
        let cfg = PipelineConfig {
            c: 2,
            ..PipelineConfig::default()
        };
        let e = Engine::new(cfg, Components::reference()).unwrap();
        let r = e.ask("What does the star tracker measure?", &srs(), &wet_mass_corpus()).unwrap();
        assert_eq!(r.retrieved_doc_ids, ["Star_tracker", "Wet_mass"]);
        assert!(r.corpus_hits.len() <= 3);
    }

    #[test]
    fn deterministic() {
        let a = engine().ask("What is wet mass?", &srs(), &wet_mass_corpus()).unwrap();
        let b = engine().ask("What is wet mass?", &srs(), &wet_mass_corpus()).unwrap();
        assert_eq!(a.srs_hits, b.srs_hits);
        assert_eq!(a.corpus_hits, b.corpus_hits);
    }

    #[test]
    fn empty_srs_and_bad_config_rejected() {
        let blank = Document::from_plain_text("s", "  \n\n ");
        assert!(matches!(engine().ask("q", &blank, &empty_corpus()), Err(PipelineError::EmptySrs)));
        let cfg = PipelineConfig {
            k: 0,
            ..PipelineConfig::default()
        };
        assert!(matches!(Engine::from_config(cfg), Err(PipelineError::InvalidConfig(_))));
    }

    struct Broken;
    impl Reader for Broken {
        fn name(&self) -> &str {
            "broken"
        }
        fn extract(&self, _: &str, passage: &str) -> Result<Option<SpanPrediction>, PluginError> {
            if passage.contains("star") {
                Err(PluginError::Component("boom".into()))
            } else {
                Ok(Some(SpanPrediction {
                    start: 0,
                    end: 5,
                    score: 0.5,
                }))
            }
        }
    }

    #[test]
    fn reader_failure_is_a_per_hit_warning() {
        let comps = Components {
            reader: Arc::new(Broken),
            ..Components::reference()
        };
        let e = Engine::new(PipelineConfig::default(), comps).unwrap();
        let r = e.ask("star tracker attitude", &srs(), &empty_corpus()).unwrap();
        assert_eq!(r.srs_hits.len(), 3);
        let broken: Vec<_> = r.srs_hits.iter().filter(|h| h.warning.is_some()).collect();
        assert_eq!(broken.len(), 1);
        assert!(broken[0].answer.is_none());
        assert!(r.srs_hits.iter().filter(|h| h.warning.is_none()).all(|h| h.answer.is_some()));
    }

    struct Down;
    impl ArticleFetcher for Down {
        fn name(&self) -> &str {
            "down"
        }
        fn search(&self, _: &str) -> Result<Vec<Article>, CorpusError> {
            Err(CorpusError::Fetch("unreachable".into()))
        }
    }

    #[test]
    fn corpus_guard() {
        let group = [srs()];
        let opts = AssembleOptions::default();
        let (c, w) = build_domain_corpus_if_absent(Some(wet_mass_corpus()), &group, &Down, 50, &opts);
        assert_eq!(c, wet_mass_corpus());
        assert!(w.is_empty());

        let fixture = FixtureFetcher::new(
            vec![
                Article { title: "Wet mass".into(), text: "Total mass.".into() },
                Article { title: "Star tracker".into(), text: "Optical device.".into() },
                Article { title: "Navigation camera".into(), text: "Captures images.".into() },
            ],
            10,
        );
        let (c, _) = build_domain_corpus_if_absent(None, &group, &fixture, 50, &opts);
        assert_eq!(c.size(), 3);

        let (c, w) = build_domain_corpus_if_absent(None, &group, &Down, 50, &opts);
        assert!(c.is_empty());
        assert_eq!(w.len(), 1);
        let r = engine().ask("What is wet mass?", &srs(), &c).unwrap();
        assert!(r.corpus_missing && r.corpus_hits.is_empty() && !r.srs_hits.is_empty());
    }

    #[test]
    fn config_serde_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"k": 5}"#).unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.c, 1);
        assert_eq!(cfg.document_retriever.kind, RetrieverKind::Bm25);
        assert_eq!(cfg.passage_retriever.kind, RetrieverKind::Rerank);
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"components":{"reader":{"name":"albert","command":["python3","r.py"]}}}"#).unwrap();
        assert_eq!(cfg.components.reader.unwrap().name, "albert");
    }
}
