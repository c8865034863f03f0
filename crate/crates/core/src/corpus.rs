//! Domain corpus construction from a group of requirements documents.
//!
//! Candidate concepts are contiguous runs of one to three content words.
//! Each concept gets a phrase-level TF-IDF score over the group (tf summed
//! across the group, smoothed idf across its documents). Concepts that are
//! plain general-English entries are marked generic. The top keywords are
//! used to search an article source, and an article is kept when its title
//! shares enough content tokens with the keyword that found it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lexicon;
use crate::retrieval::{smoothed_idf, Corpus, CorpusDocument};
use crate::textseg::{split_sentences, Document};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no usable article was found for any keyword ({} fetch failures)", failures.len())]
    Empty { failures: Vec<(String, String)> },
    #[error("article fetch failed: {0}")]
    Fetch(String),
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub phrase: String,
    pub tfidf: f64,
    pub generic: bool,
    pub tf: usize,
    pub df: usize,
}

fn is_phrase_word(word: &str) -> bool {
    lexicon::is_word(word) && word.chars().any(char::is_alphabetic) && !lexicon::is_stopword(word)
}

/// Runs of consecutive content words in each sentence.
fn content_runs(doc: &Document) -> Vec<Vec<String>> {
    let mut runs = Vec::new();
    for paragraph in &doc.paragraphs {
        for sentence in split_sentences(paragraph) {
            let mut run: Vec<String> = Vec::new();
            for tok in &sentence.tokens {
                let lower = tok.text.to_lowercase();
                if is_phrase_word(&lower) {
                    run.push(lower);
                } else if !run.is_empty() {
                    runs.push(std::mem::take(&mut run));
                }
            }
            if !run.is_empty() {
                runs.push(run);
            }
        }
    }
    runs
}

/// Scores every 1-3 word content phrase of the group, best first; ties go
/// to the lexicographically smaller phrase.
pub fn extract_concepts(srs_group: &[Document]) -> Vec<Concept> {
    let mut tf: HashMap<String, usize> = HashMap::new();
    let mut df: HashMap<String, usize> = HashMap::new();
    for doc in srs_group {
        let mut seen: HashSet<String> = HashSet::new();
        for run in content_runs(doc) {
            for n in 1..=3 {
                for gram in run.windows(n) {
                    let phrase = gram.join(" ");
                    *tf.entry(phrase.clone()).or_default() += 1;
                    seen.insert(phrase);
                }
            }
        }
        for phrase in seen {
            *df.entry(phrase).or_default() += 1;
        }
    }
    let n_docs = srs_group.len();
    let mut concepts: Vec<Concept> = tf
        .into_iter()
        .map(|(phrase, tf)| {
            let d = df[&phrase];
            Concept {
                tfidf: tf as f64 * smoothed_idf(n_docs, d),
                generic: lexicon::is_generic(&phrase),
                phrase,
                tf,
                df: d,
            }
        })
        .collect();
    concepts.sort_by(|a, b| b.tfidf.total_cmp(&a.tfidf).then_with(|| a.phrase.cmp(&b.phrase)));
    concepts
}

/// The `n` best non-generic concepts, in score order.
pub fn select_keywords(concepts: &[Concept], n: usize) -> Vec<String> {
    let mut ranked: Vec<&Concept> = concepts.iter().filter(|c| !c.generic).collect();
    ranked.sort_by(|a, b| b.tfidf.total_cmp(&a.tfidf).then_with(|| a.phrase.cmp(&b.phrase)));
    ranked.into_iter().take(n).map(|c| c.phrase.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub title: String,
    pub text: String,
}

/// A searchable article source.
pub trait ArticleFetcher: Send + Sync {
    /// Stable name; part of the cache key.
    fn name(&self) -> &str;
    fn search(&self, keyword: &str) -> Result<Vec<Article>, CorpusError>;
}

/// Articles from a directory of `{title, text}` JSON files. A keyword
/// matches an article when any of its content tokens occurs in the title or
/// the text. Results follow file-name order.
#[derive(Debug)]
pub struct FixtureFetcher {
    articles: Vec<Article>,
    max_results: usize,
    calls: AtomicUsize,
}

impl FixtureFetcher {
    pub fn from_dir(dir: &Path, max_results: usize) -> Result<Self, CorpusError> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        let mut articles = Vec::with_capacity(files.len());
        for f in files {
            let raw = std::fs::read_to_string(&f)?;
            let article: Article =
                serde_json::from_str(&raw).map_err(|e| CorpusError::Fetch(format!("{}: {e}", f.display())))?;
            articles.push(article);
        }
        Ok(Self::new(articles, max_results))
    }

    pub fn new(articles: Vec<Article>, max_results: usize) -> Self {
        Self {
            articles,
            max_results,
            calls: AtomicUsize::new(0),
        }
    }

    /// Number of `search` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ArticleFetcher for FixtureFetcher {
    fn name(&self) -> &str {
        "fixture"
    }

    fn search(&self, keyword: &str) -> Result<Vec<Article>, CorpusError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let wanted: HashSet<String> = lexicon::content_terms(keyword).into_iter().collect();
        Ok(self
            .articles
            .iter()
            .filter(|a| {
                lexicon::words(&a.title)
                    .into_iter()
                    .chain(lexicon::words(&a.text))
                    .any(|w| wanted.contains(&w))
            })
            .take(self.max_results)
            .cloned()
            .collect())
    }
}

/// MediaWiki-style search + plain-text extract API client.
#[derive(Debug)]
pub struct WikiFetcher {
    base_url: String,
    max_results: usize,
    min_interval: Duration,
    last_request: Mutex<Option<Instant>>,
    agent: ureq::Agent,
}

/// Environment variable overriding the API base URL.
pub const WIKI_API_ENV: &str = "QASSIST_WIKI_API";
pub const DEFAULT_WIKI_API: &str = "https://en.wikipedia.org/w/api.php";

impl WikiFetcher {
    pub fn new(base_url: impl Into<String>, max_results: usize, requests_per_second: f64) -> Self {
        let min_interval = if requests_per_second > 0.0 {
            Duration::from_secs_f64(1.0 / requests_per_second)
        } else {
            Duration::ZERO
        };
        Self {
            base_url: base_url.into(),
            max_results: max_results.clamp(1, 20),
            min_interval,
            last_request: Mutex::new(None),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(30)).build(),
        }
    }

    /// Base URL from `QASSIST_WIKI_API`, falling back to English Wikipedia.
    pub fn from_env(max_results: usize, requests_per_second: f64) -> Self {
        let base = std::env::var(WIKI_API_ENV).unwrap_or_else(|_| DEFAULT_WIKI_API.to_string());
        Self::new(base, max_results, requests_per_second)
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn get(&self, params: &[(&str, &str)]) -> Result<serde_json::Value, CorpusError> {
        self.throttle();
        let mut req = self.agent.get(&self.base_url);
        for (k, v) in params {
            req = req.query(k, v);
        }
        req.call()
            .map_err(|e| CorpusError::Fetch(e.to_string()))?
            .into_json()
            .map_err(|e| CorpusError::Fetch(e.to_string()))
    }
}

impl ArticleFetcher for WikiFetcher {
    fn name(&self) -> &str {
        "wiki"
    }

    fn search(&self, keyword: &str) -> Result<Vec<Article>, CorpusError> {
        let limit = self.max_results.to_string();
        let found = self.get(&[
            ("action", "query"),
            ("list", "search"),
            ("srsearch", keyword),
            ("srlimit", &limit),
            ("format", "json"),
        ])?;
        let titles: Vec<String> = found["query"]["search"]
            .as_array()
            .map(|hits| {
                hits.iter()
                    .filter_map(|h| h["title"].as_str().map(str::to_string))
                    .collect()
            })
            .unwrap_or_default();
        if titles.is_empty() {
            return Ok(Vec::new());
        }
        let joined = titles.join("|");
        let pages = self.get(&[
            ("action", "query"),
            ("prop", "extracts"),
            ("explaintext", "1"),
            ("exlimit", "max"),
            ("redirects", "1"),
            ("titles", &joined),
            ("format", "json"),
        ])?;
        let mut by_title: HashMap<String, String> = HashMap::new();
        if let Some(map) = pages["query"]["pages"].as_object() {
            for page in map.values() {
                if let (Some(t), Some(x)) = (page["title"].as_str(), page["extract"].as_str()) {
                    by_title.insert(t.to_string(), x.to_string());
                }
            }
        }
        // keep search order
        Ok(titles
            .into_iter()
            .filter_map(|t| {
                by_title.remove(&t).filter(|x| !x.trim().is_empty()).map(|text| Article { title: t, text })
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRule {
    /// Content tokens a title must share with the keyword.
    pub min_shared_tokens: usize,
}

impl Default for MatchRule {
    fn default() -> Self {
        Self { min_shared_tokens: 1 }
    }
}

impl MatchRule {
    pub fn matches(&self, keyword: &str, title: &str) -> bool {
        let k: HashSet<String> = lexicon::content_terms(keyword).into_iter().collect();
        let t: HashSet<String> = lexicon::content_terms(title).into_iter().collect();
        k.intersection(&t).count() >= self.min_shared_tokens.max(1)
    }
}

#[derive(Debug, Clone)]
pub struct AssembleOptions {
    pub domain: String,
    pub match_rule: MatchRule,
    pub cache_dir: Option<PathBuf>,
    /// Upper bound on keywords fetched at the same time.
    pub concurrency: usize,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            domain: "domain".into(),
            match_rule: MatchRule::default(),
            cache_dir: None,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyReport {
    pub corpus: Corpus,
    /// keyword -> titles of the documents it contributed to
    pub provenance: BTreeMap<String, Vec<String>>,
    pub failures: Vec<(String, String)>,
    pub cache_hits: usize,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    fetcher: String,
    keyword: String,
    articles: Vec<Article>,
}

fn cache_path(dir: &Path, fetcher: &str, keyword: &str) -> PathBuf {
    let mut h = Sha256::new();
    h.update(fetcher.as_bytes());
    h.update(b"\n");
    h.update(keyword.trim().to_lowercase().as_bytes());
    let digest = h.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("{hex}.json"))
}

fn read_cache(path: &Path) -> Option<Vec<Article>> {
    let raw = std::fs::read_to_string(path).ok()?;
    serde_json::from_str::<CacheEntry>(&raw).ok().map(|e| e.articles)
}

fn write_cache(path: &Path, entry: &CacheEntry) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, serde_json::to_vec(entry)?)?;
    std::fs::rename(tmp, path)
}

fn title_key(title: &str) -> String {
    lexicon::words(title).join(" ")
}

fn doc_id(title: &str) -> String {
    title.split_whitespace().collect::<Vec<_>>().join("_")
}

enum Fetched {
    Cached(Vec<Article>),
    Fresh(Vec<Article>),
    Failed(String),
}

/// Searches `fetcher` for every keyword and keeps the title-matching
/// articles, de-duplicated by title. With a cache directory, search results
/// are stored under a content hash of (fetcher, keyword) and reused.
pub fn assemble_corpus(
    keywords: &[String],
    fetcher: &dyn ArticleFetcher,
    options: &AssembleOptions,
) -> Result<AssemblyReport, CorpusError> {
    if let Some(dir) = &options.cache_dir {
        std::fs::create_dir_all(dir)?;
    }
    let slots: Vec<Mutex<Option<Fetched>>> = keywords.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.concurrency.clamp(1, keywords.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(keyword) = keywords.get(i) else { break };
                let result = fetch_one(keyword, fetcher, options.cache_dir.as_deref());
                *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(result);
            });
        }
    });

    let mut documents: Vec<CorpusDocument> = Vec::new();
    let mut by_title: HashMap<String, usize> = HashMap::new();
    let mut provenance: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut failures = Vec::new();
    let mut cache_hits = 0;
    for (keyword, slot) in keywords.iter().zip(slots) {
        let articles = match slot.into_inner().unwrap_or_else(|p| p.into_inner()) {
            Some(Fetched::Cached(a)) => {
                cache_hits += 1;
                a
            }
            Some(Fetched::Fresh(a)) => a,
            Some(Fetched::Failed(e)) => {
                tracing::warn!(keyword = %keyword, error = %e, "article search failed");
                failures.push((keyword.clone(), e));
                continue;
            }
            None => continue,
        };
        for article in articles {
            if !options.match_rule.matches(keyword, &article.title) {
                continue;
            }
            let key = title_key(&article.title);
            let idx = *by_title.entry(key).or_insert_with(|| {
                documents.push(CorpusDocument {
                    id: doc_id(&article.title),
                    title: article.title.clone(),
                    text: article.text.clone(),
                    keywords: Vec::new(),
                });
                documents.len() - 1
            });
            let doc = &mut documents[idx];
            if !doc.keywords.contains(keyword) {
                doc.keywords.push(keyword.clone());
                provenance.entry(keyword.clone()).or_default().push(doc.title.clone());
            }
        }
    }
    if documents.is_empty() {
        return Err(CorpusError::Empty { failures });
    }
    Ok(AssemblyReport {
        corpus: Corpus {
            domain: options.domain.clone(),
            documents,
        },
        provenance,
        failures,
        cache_hits,
    })
}

fn fetch_one(keyword: &str, fetcher: &dyn ArticleFetcher, cache: Option<&Path>) -> Fetched {
    let path = cache.map(|dir| cache_path(dir, fetcher.name(), keyword));
    if let Some(hit) = path.as_deref().and_then(read_cache) {
        return Fetched::Cached(hit);
    }
    match fetcher.search(keyword) {
        Ok(articles) => {
            if let Some(p) = &path {
                let entry = CacheEntry {
                    fetcher: fetcher.name().to_string(),
                    keyword: keyword.to_string(),
                    articles,
                };
                if let Err(e) = write_cache(p, &entry) {
                    tracing::warn!(path = %p.display(), error = %e, "could not write article cache");
                }
                return Fetched::Fresh(entry.articles);
            }
            Fetched::Fresh(articles)
        }
        Err(e) => Fetched::Failed(e.to_string()),
    }
}

/// Concept extraction, keyword selection and assembly in one call.
pub fn build_corpus(
    srs_group: &[Document],
    fetcher: &dyn ArticleFetcher,
    n_keywords: usize,
    options: &AssembleOptions,
) -> Result<AssemblyReport, CorpusError> {
    let keywords = select_keywords(&extract_concepts(srs_group), n_keywords);
    assemble_corpus(&keywords, fetcher, options)
}

/// A seeded random subset of `n` documents, in corpus order.
pub fn sample_documents(corpus: &Corpus, n: usize, seed: u64) -> Vec<&CorpusDocument> {
    let n = n.min(corpus.size());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, corpus.size(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| &corpus.documents[i]).collect()
}
