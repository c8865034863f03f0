use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_items, term_counts, unique_terms, Item, RankedHits, RetrievalError};
use crate::lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        let k1_ok = self.k1 > 0.0 && self.k1.is_finite();
        if !k1_ok || !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::InvalidParams(format!(
                "bm25 requires k1 > 0 and 0 <= b <= 1, got k1={} b={}",
                self.k1, self.b
            )));
        }
        Ok(())
    }
}

/// Okapi BM25 over an inverted index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    /// term -> (item ordinal, term frequency), ordinals ascending
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
    pub item_ids: Vec<String>,
    pub doc_len: Vec<u32>,
    pub avg_len: f64,
    pub params: Bm25Params,
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, clamped at zero.
pub fn bm25_idf(n_docs: usize, df: usize) -> f64 {
    let (n, df) = (n_docs as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln().max(0.0)
}

/// Contribution of one query term to one document.
pub fn bm25_term_score(idf: f64, tf: f64, doc_len: f64, avg_len: f64, params: Bm25Params) -> f64 {
    let Bm25Params { k1, b } = params;
    let ratio = if avg_len > 0.0 { doc_len / avg_len } else { 1.0 };
    idf * (tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * ratio)))
}

impl Bm25Index {
    pub fn build(items: &[Item], params: Bm25Params) -> Result<Self, RetrievalError> {
        check_items(items)?;
        params.validate()?;
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        let mut doc_len = Vec::with_capacity(items.len());
        for (ord, item) in items.iter().enumerate() {
            let terms = lexicon::content_terms(&item.text);
            doc_len.push(terms.len() as u32);
            for (term, tf) in term_counts(&terms) {
                postings.entry(term).or_default().push((ord as u32, tf));
            }
        }
        let avg_len = doc_len.iter().map(|&l| l as f64).sum::<f64>() / items.len() as f64;
        Ok(Self {
            postings,
            item_ids: items.iter().map(|it| it.id.clone()).collect(),
            doc_len,
            avg_len,
            params,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.item_ids.len()
    }

    /// Scores every item. Query terms are taken once each, in order of
    /// first occurrence.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_docs()];
        for term in unique_terms(&lexicon::content_terms(query)) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = bm25_idf(self.n_docs(), list.len());
            for &(ord, tf) in list {
                let ord = ord as usize;
                scores[ord] += bm25_term_score(idf, tf as f64, self.doc_len[ord] as f64, self.avg_len, self.params);
            }
        }
        scores
    }

    pub fn rank(&self, query: &str) -> RankedHits {
        let scores = self.scores(query);
        RankedHits::from_scores(query, self.item_ids.iter().cloned().zip(scores))
    }
}
