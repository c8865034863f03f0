//! Ranked retrieval over documents and passages.
//!
//! Four retriever families share one output type, [`RankedHits`]:
//!
//! - TF-IDF with smoothed idf and cosine similarity ([`TfidfIndex`])
//! - Okapi BM25 ([`Bm25Index`])
//! - dense cosine over an [`Embedder`] ([`DenseIndex`])
//! - BM25 candidates re-scored by a [`CrossScorer`] ([`rerank`])
//!
//! Hits are always sorted by descending score with ties broken by ascending
//! item id, so truncating to `k` keeps the lexicographically smaller id at a
//! tied boundary.

mod bm25;
mod dense;
mod persist;
mod rerank;
mod tfidf;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bm25::{bm25_idf, bm25_term_score, Bm25Index, Bm25Params};
pub use dense::{cosine, embed_checked, DenseIndex, Embedder, HashingEmbedder, PluginEmbedder};
pub use persist::{load_index, save_index, IndexFile, INDEX_FORMAT_VERSION, INDEX_MAGIC};
pub use rerank::{rerank, CrossScorer, OverlapScorer, PluginCrossScorer};
pub use tfidf::{smoothed_idf, sparse_dot, SparseVector, TfidfIndex};

use crate::plugin::PluginError;
use crate::textseg::Passage;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot build an index over an empty collection")]
    EmptyCollection,
    #[error("duplicate item id `{0}`")]
    DuplicateItem(String),
    #[error("domain corpus is empty or missing")]
    MissingCorpus,
    #[error("{0}")]
    InvalidParams(String),
    #[error("index file: {0}")]
    Format(String),
    #[error("component failed: {0}")]
    Component(#[from] PluginError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A retrievable unit: a document or a passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub text: String,
}

pub fn items(pairs: &[(&str, &str)]) -> Vec<Item> {
    pairs
        .iter()
        .map(|(id, text)| Item {
            id: id.to_string(),
            text: text.to_string(),
        })
        .collect()
}

impl From<&Passage> for Item {
    fn from(p: &Passage) -> Self {
        Item {
            id: p.id.clone(),
            text: p.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub item_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHits {
    pub query_id: String,
    pub hits: Vec<Hit>,
}

impl RankedHits {
    /// Sorts by descending score, ties by ascending item id.
    pub fn from_scores(query_id: &str, scores: impl IntoIterator<Item = (String, f64)>) -> Self {
        let mut hits: Vec<Hit> = scores
            .into_iter()
            // fold -0.0 into 0.0 so total ordering treats them as a tie
            .map(|(item_id, score)| Hit { item_id, score: score + 0.0 })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.item_id.cmp(&b.item_id)));
        Self {
            query_id: query_id.to_string(),
            hits,
        }
    }

    pub fn truncated(mut self, k: usize) -> Self {
        self.hits.truncate(k);
        self
    }

    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.item_id.as_str()).collect()
    }

    /// 1-based rank of `item_id`, if present.
    pub fn rank_of(&self, item_id: &str) -> Option<usize> {
        self.hits.iter().position(|h| h.item_id == item_id).map(|p| p + 1)
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

pub(crate) fn check_items(items: &[Item]) -> Result<(), RetrievalError> {
    if items.is_empty() {
        return Err(RetrievalError::EmptyCollection);
    }
    let mut seen = HashSet::new();
    for it in items {
        if !seen.insert(it.id.as_str()) {
            return Err(RetrievalError::DuplicateItem(it.id.clone()));
        }
    }
    Ok(())
}

pub(crate) fn term_counts(terms: &[String]) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for t in terms {
        *counts.entry(t.clone()).or_default() += 1;
    }
    counts
}

pub(crate) fn unique_terms(terms: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    terms.iter().filter(|t| seen.insert(t.as_str())).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    Tfidf,
    Bm25,
    Dense,
    Rerank,
}

impl RetrieverKind {
    pub const ALL: [RetrieverKind; 4] = [Self::Tfidf, Self::Bm25, Self::Dense, Self::Rerank];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Tfidf => "tfidf",
            Self::Bm25 => "bm25",
            Self::Dense => "dense",
            Self::Rerank => "rerank",
        }
    }
}

impl std::fmt::Display for RetrieverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RetrieverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tfidf" | "tf-idf" => Ok(Self::Tfidf),
            "bm25" => Ok(Self::Bm25),
            "dense" => Ok(Self::Dense),
            "rerank" | "reranking" => Ok(Self::Rerank),
            other => Err(format!("unknown retriever `{other}` (expected tfidf, bm25, dense or rerank)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrieverOptions {
    pub kind: RetrieverKind,
    #[serde(default)]
    pub bm25: Bm25Params,
    /// Number of BM25 candidates the cross scorer re-scores.
    #[serde(default = "default_rerank_depth")]
    pub rerank_depth: usize,
}

fn default_rerank_depth() -> usize {
    20
}

impl RetrieverOptions {
    pub fn new(kind: RetrieverKind) -> Self {
        Self {
            kind,
            bm25: Bm25Params::default(),
            rerank_depth: default_rerank_depth(),
        }
    }
}

/// The model components a ranking call may need.
#[derive(Clone, Copy)]
pub struct Rankers<'a> {
    pub embedder: &'a dyn Embedder,
    pub scorer: &'a dyn CrossScorer,
}

/// BM25 candidates plus the texts the cross scorer needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankIndex {
    pub base: Bm25Index,
    pub texts: Vec<String>,
    pub depth: usize,
}

/// A built index for any retriever family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Index {
    Tfidf(TfidfIndex),
    Bm25(Bm25Index),
    Dense(DenseIndex),
    Rerank(RerankIndex),
}

impl Index {
    pub fn build(items: &[Item], options: &RetrieverOptions, embedder: &dyn Embedder) -> Result<Self, RetrievalError> {
        Ok(match options.kind {
            RetrieverKind::Tfidf => Index::Tfidf(TfidfIndex::build(items)?),
            RetrieverKind::Bm25 => Index::Bm25(Bm25Index::build(items, options.bm25)?),
            RetrieverKind::Dense => Index::Dense(DenseIndex::build(items, embedder)?),
            RetrieverKind::Rerank => {
                if options.rerank_depth == 0 {
                    return Err(RetrievalError::InvalidParams("rerank depth must be at least 1".into()));
                }
                Index::Rerank(RerankIndex {
                    base: Bm25Index::build(items, options.bm25)?,
                    texts: items.iter().map(|it| it.text.clone()).collect(),
                    depth: options.rerank_depth,
                })
            }
        })
    }

    pub fn kind(&self) -> RetrieverKind {
        match self {
            Index::Tfidf(_) => RetrieverKind::Tfidf,
            Index::Bm25(_) => RetrieverKind::Bm25,
            Index::Dense(_) => RetrieverKind::Dense,
            Index::Rerank(_) => RetrieverKind::Rerank,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Index::Tfidf(i) => i.item_ids.len(),
            Index::Bm25(i) => i.item_ids.len(),
            Index::Dense(i) => i.item_ids.len(),
            Index::Rerank(i) => i.base.item_ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ranks every indexed item against `query`.
    pub fn rank(&self, query: &str, rankers: Rankers<'_>) -> Result<RankedHits, RetrievalError> {
        match self {
            Index::Tfidf(i) => Ok(i.rank(query)),
            Index::Bm25(i) => Ok(i.rank(query)),
            Index::Dense(i) => i.rank(rankers.embedder, query),
            Index::Rerank(r) => {
                let base = r.base.rank(query);
                let position: BTreeMap<&str, usize> =
                    r.base.item_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
                let scored = rerank(&base, r.depth, |id| {
                    rankers.scorer.score(query, &r.texts[position[id]])
                })?;
                Ok(scored)
            }
        }
    }

    /// The first `k` hits.
    pub fn top(&self, query: &str, k: usize, rankers: Rankers<'_>) -> Result<RankedHits, RetrievalError> {
        Ok(self.rank(query, rankers)?.truncated(k))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub id: String,
    pub title: String,
    pub text: String,
    /// Keywords whose search produced this document.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
}

/// A named collection of domain documents.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub domain: String,
    pub documents: Vec<CorpusDocument>,
}

impl Corpus {
    pub fn size(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CorpusDocument> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn items(&self) -> Vec<Item> {
        self.documents
            .iter()
            .map(|d| Item {
                id: d.id.clone(),
                text: d.text.clone(),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let mut seen = HashSet::new();
        for d in &self.documents {
            if !seen.insert(d.id.as_str()) {
                return Err(RetrievalError::DuplicateItem(d.id.clone()));
            }
        }
        Ok(())
    }

    /// Loads a JSON manifest `{domain, documents: [{id, title, text}]}` or a
    /// directory of `.txt` files (id and title from the file stem, domain
    /// from the directory name).
    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let corpus = if path.is_dir() {
            let mut files: Vec<_> = std::fs::read_dir(path)?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            files.sort();
            let mut documents = Vec::with_capacity(files.len());
            for f in files {
                let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                documents.push(CorpusDocument {
                    title: stem.replace('_', " "),
                    id: stem,
                    text: std::fs::read_to_string(&f)?,
                    keywords: Vec::new(),
                });
            }
            Corpus {
                domain: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                documents,
            }
        } else {
            let raw = std::fs::read_to_string(path)?;
            serde_json::from_str(&raw).map_err(|e| RetrievalError::Format(format!("{}: {e}", path.display())))?
        };
        corpus.validate()?;
        Ok(corpus)
    }
}

/// Top `c` documents of `corpus` for `question`, best first.
pub fn retrieve_document(
    corpus: &Corpus,
    question: &str,
    c: usize,
    options: &RetrieverOptions,
    rankers: Rankers<'_>,
) -> Result<Vec<String>, RetrievalError> {
    if corpus.is_empty() {
        return Err(RetrievalError::MissingCorpus);
    }
    let index = Index::build(&corpus.items(), options, rankers.embedder)?;
    retrieve_document_indexed(&index, question, c, rankers)
}

pub fn retrieve_document_indexed(
    index: &Index,
    question: &str,
    c: usize,
    rankers: Rankers<'_>,
) -> Result<Vec<String>, RetrievalError> {
    if c == 0 {
        return Err(RetrievalError::InvalidParams("c must be at least 1".into()));
    }
    Ok(index
        .top(question, c, rankers)?
        .hits
        .into_iter()
        .map(|h| h.item_id)
        .collect())
}

/// Top `k` passages for `question`; fewer when there are fewer passages.
pub fn retrieve_passages(
    passages: &[Passage],
    question: &str,
    k: usize,
    options: &RetrieverOptions,
    rankers: Rankers<'_>,
) -> Result<RankedHits, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidParams("k must be at least 1".into()));
    }
    let items: Vec<Item> = passages.iter().map(Item::from).collect();
    Index::build(&items, options, rankers.embedder)?.top(question, k, rankers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textseg::{split_passages, Document, Source, SplitConfig};

    fn rankers() -> (HashingEmbedder, OverlapScorer) {
        (HashingEmbedder::default(), OverlapScorer)
    }

    #[test]
    fn ties_break_by_id() {
        let h = RankedHits::from_scores("q", [("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), -0.0), ("d".into(), 0.0)]);
        assert_eq!(h.ids(), ["a", "b", "c", "d"]);
        assert_eq!(h.truncated(1).ids(), ["a"]);
    }

    #[test]
    fn duplicate_and_empty_collections_rejected() {
        assert!(matches!(Bm25Index::build(&[], Bm25Params::default()), Err(RetrievalError::EmptyCollection)));
        assert!(matches!(
            TfidfIndex::build(&items(&[("a", "x"), ("a", "y")])),
            Err(RetrievalError::DuplicateItem(_))
        ));
    }

    #[test]
    fn single_document_corpus() {
        let (e, s) = rankers();
        let r = Rankers { embedder: &e, scorer: &s };
        let corpus = Corpus {
            domain: "space".into(),
            documents: vec![CorpusDocument {
                id: "only".into(),
                title: "Only".into(),
                text: "Nothing related.".into(),
                keywords: vec![],
            }],
        };
        for kind in RetrieverKind::ALL {
            let got = retrieve_document(&corpus, "what is wet mass?", 1, &RetrieverOptions::new(kind), r).unwrap();
            assert_eq!(got, ["only"]);
        }
    }

    #[test]
    fn empty_corpus_is_missing_resource() {
        let (e, s) = rankers();
        let r = Rankers { embedder: &e, scorer: &s };
        let err = retrieve_document(&Corpus::default(), "q", 1, &RetrieverOptions::new(RetrieverKind::Bm25), r);
        assert!(matches!(err, Err(RetrievalError::MissingCorpus)));
    }

    #[test]
    fn verbatim_first_paragraph_finds_article() {
        let (e, s) = rankers();
        let r = Rankers { embedder: &e, scorer: &s };
        let docs = [
            ("Wet_mass", "Wet mass is the total mass of a spacecraft including propellant.\n\nIt is quoted at launch."),
            ("Dry_mass", "Dry mass is the mass of a vehicle without propellant or consumables."),
            ("Star_tracker", "A star tracker is an optical device that measures star positions."),
            ("Reaction_wheel", "A reaction wheel stores angular momentum for attitude control."),
            ("Propellant_tank", "A propellant tank stores fuel and oxidiser under pressure."),
        ];
        let corpus = Corpus {
            domain: "aerospace".into(),
            documents: docs
                .iter()
                .map(|(id, text)| CorpusDocument {
                    id: id.to_string(),
                    title: id.replace('_', " "),
                    text: text.to_string(),
                    keywords: vec![],
                })
                .collect(),
        };
        let q = "A star tracker is an optical device that measures star positions.";
        let got = retrieve_document(&corpus, q, 1, &RetrieverOptions::new(RetrieverKind::Bm25), r).unwrap();
        assert_eq!(got, ["Star_tracker"]);
        let top2 = retrieve_document(&corpus, "wet mass propellant", 2, &RetrieverOptions::new(RetrieverKind::Bm25), r).unwrap();
        assert_eq!(top2.len(), 2);
        assert_eq!(top2[0], "Wet_mass");
    }

    #[test]
    fn passage_retrieval_limits_and_unique_phrase() {
        let (e, s) = rankers();
        let r = Rankers { embedder: &e, scorer: &s };
        let doc = Document::from_plain_text(
            "srs",
            "The rover shall log wheel odometry.\n\nThe lander shall deploy the sample scoop.\n\nThe orbiter shall relay telemetry.",
        );
        let ps = split_passages(&doc, Source::Srs, &SplitConfig::default());
        let opts = RetrieverOptions::new(RetrieverKind::Rerank);
        let hits = retrieve_passages(&ps, "deploy the sample scoop", 3, &opts, r).unwrap();
        assert_eq!(hits.hits[0].item_id, "srs#0001");
        assert_eq!(retrieve_passages(&ps, "anything", 10, &opts, r).unwrap().len(), 3);
        assert_eq!(retrieve_passages(&ps[..1], "anything", 3, &opts, r).unwrap().ids(), ["srs#0000"]);
        assert!(retrieve_passages(&ps, "x", 0, &opts, r).is_err());
    }

    #[test]
    fn corpus_loads_from_dir_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("aerospace");
        std::fs::create_dir(&sub).unwrap();
        std::fs::write(sub.join("Wet_mass.txt"), "Wet mass text.").unwrap();
        std::fs::write(sub.join("Dry_mass.txt"), "Dry mass text.").unwrap();
        std::fs::write(sub.join("notes.md"), "ignored").unwrap();
        let c = Corpus::load(&sub).unwrap();
        assert_eq!(c.domain, "aerospace");
        assert_eq!(c.size(), 2);
        assert_eq!(c.documents[0].id, "Dry_mass");
        assert_eq!(c.documents[1].title, "Wet mass");

        let manifest = dir.path().join("corpus.json");
        std::fs::write(&manifest, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(Corpus::load(&manifest).unwrap(), c);

        std::fs::write(&manifest, "{\"domain\":1}").unwrap();
        assert!(matches!(Corpus::load(&manifest), Err(RetrievalError::Format(_))));
    }
}
