use serde::{Deserialize, Serialize};

use super::{check_items, Item, RankedHits, RetrievalError};
use crate::lexicon;
use crate::plugin::{JsonPlugin, PluginError, PluginSpec};

/// Maps text to a fixed-dimension dense vector.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>, PluginError>;
    /// Whether `embed` may be called from several threads at once.
    fn concurrency_safe(&self) -> bool {
        true
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &byte in *part {
            h ^= byte as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Signed feature hashing of lowercased unigrams and bigrams, L2-normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dimension: 1024 }
    }
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    /// Bucket and sign of one feature.
    pub fn slot(&self, feature: &[&[u8]]) -> (usize, f32) {
        let h = fnv1a(feature);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        ((h % self.dimension as u64) as usize, sign)
    }

    /// Un-normalised hashed counts.
    pub fn raw_counts(&self, text: &str) -> Vec<f32> {
        let words = lexicon::words(text);
        let mut v = vec![0.0f32; self.dimension];
        for w in &words {
            let (i, s) = self.slot(&[b"u:", w.as_bytes()]);
            v[i] += s;
        }
        for pair in words.windows(2) {
            let (i, s) = self.slot(&[b"b:", pair[0].as_bytes(), b" ", pair[1].as_bytes()]);
            v[i] += s;
        }
        v
    }
}

impl Embedder for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, PluginError> {
        let mut v = self.raw_counts(text);
        let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x = (*x as f64 / norm) as f32;
            }
        }
        Ok(v)
    }
}

/// Cosine similarity accumulated in f64; zero vectors score 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Pre-embedded items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseIndex {
    pub embedder: String,
    pub dimension: usize,
    pub item_ids: Vec<String>,
    pub vectors: Vec<Vec<f32>>,
}

impl DenseIndex {
    pub fn build(items: &[Item], embedder: &dyn Embedder) -> Result<Self, RetrievalError> {
        check_items(items)?;
        let vectors = items
            .iter()
            .map(|it| embed_checked(embedder, &it.text))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            embedder: embedder.name().to_string(),
            dimension: embedder.dimension(),
            item_ids: items.iter().map(|it| it.id.clone()).collect(),
            vectors,
        })
    }

    pub fn rank(&self, embedder: &dyn Embedder, query: &str) -> Result<RankedHits, RetrievalError> {
        if embedder.dimension() != self.dimension {
            return Err(RetrievalError::InvalidParams(format!(
                "index built with {}-dimensional vectors, embedder `{}` produces {}",
                self.dimension,
                embedder.name(),
                embedder.dimension()
            )));
        }
        let q = embed_checked(embedder, query)?;
        let scored = self.item_ids.iter().zip(&self.vectors).map(|(id, v)| (id.clone(), cosine(&q, v)));
        Ok(RankedHits::from_scores(query, scored))
    }
}

pub fn embed_checked(embedder: &dyn Embedder, text: &str) -> Result<Vec<f32>, RetrievalError> {
    let v = embedder.embed(text)?;
    if v.len() != embedder.dimension() {
        return Err(RetrievalError::Component(PluginError::Protocol(format!(
            "embedder `{}` returned {} values, expected {}",
            embedder.name(),
            v.len(),
            embedder.dimension()
        ))));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(RetrievalError::Component(PluginError::Protocol(format!(
            "embedder `{}` returned a non-finite value",
            embedder.name()
        ))));
    }
    Ok(v)
}

/// Embedder backed by a plugin: request `{text}`, response `{vector}`.
#[derive(Debug)]
pub struct PluginEmbedder {
    name: String,
    dimension: usize,
    plugin: JsonPlugin,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f32>,
}

impl PluginEmbedder {
    pub fn new(name: impl Into<String>, dimension: usize, spec: PluginSpec) -> Self {
        Self {
            name: name.into(),
            dimension,
            plugin: JsonPlugin::new(spec),
        }
    }
}

impl Embedder for PluginEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, PluginError> {
        let resp: EmbedResponse = self.plugin.call(&EmbedRequest { text })?;
        Ok(resp.vector)
    }

    fn concurrency_safe(&self) -> bool {
        self.plugin.concurrency_safe()
    }
}
