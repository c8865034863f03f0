use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_items, term_counts, Item, RankedHits, RetrievalError};
use crate::lexicon;

/// Sparse vector as `(dimension, weight)` pairs sorted by dimension.
pub type SparseVector = Vec<(u32, f64)>;

/// TF-IDF vectors with smoothed idf, `ln((1 + N) / (1 + df)) + 1`, and L2
/// normalisation. Dimensions follow the lexicographic order of the
/// vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfIndex {
    pub vocabulary: BTreeMap<String, u32>,
    pub doc_freq: Vec<u32>,
    pub idf: Vec<f64>,
    pub item_ids: Vec<String>,
    pub doc_vectors: Vec<SparseVector>,
    pub n_docs: usize,
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl TfidfIndex {
    pub fn build(items: &[Item]) -> Result<Self, RetrievalError> {
        check_items(items)?;
        let counts: Vec<BTreeMap<String, u32>> =
            items.iter().map(|it| term_counts(&lexicon::content_terms(&it.text))).collect();

        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for c in &counts {
            for term in c.keys() {
                *df.entry(term.as_str()).or_default() += 1;
            }
        }
        let vocabulary: BTreeMap<String, u32> =
            df.keys().enumerate().map(|(i, t)| (t.to_string(), i as u32)).collect();
        let doc_freq: Vec<u32> = df.values().copied().collect();
        let n_docs = items.len();
        let idf: Vec<f64> = doc_freq.iter().map(|&d| smoothed_idf(n_docs, d as usize)).collect();

        let doc_vectors = counts
            .iter()
            .map(|c| {
                let raw = c
                    .iter()
                    .map(|(t, &tf)| {
                        let dim = vocabulary[t];
                        (dim, tf as f64 * idf[dim as usize])
                    })
                    .collect();
                normalize(raw)
            })
            .collect();

        Ok(Self {
            vocabulary,
            doc_freq,
            idf,
            item_ids: items.iter().map(|it| it.id.clone()).collect(),
            doc_vectors,
            n_docs,
        })
    }

    /// Query vector under this index's idf; out-of-vocabulary terms are dropped.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        let mut raw: BTreeMap<u32, f64> = BTreeMap::new();
        for term in lexicon::content_terms(text) {
            if let Some(&dim) = self.vocabulary.get(&term) {
                *raw.entry(dim).or_default() += 1.0;
            }
        }
        normalize(raw.into_iter().map(|(d, tf)| (d, tf * self.idf[d as usize])).collect())
    }

    pub fn rank(&self, query: &str) -> RankedHits {
        let q = self.vectorize(query);
        let scored = self
            .item_ids
            .iter()
            .zip(&self.doc_vectors)
            .map(|(id, d)| (id.clone(), sparse_dot(&q, d)));
        RankedHits::from_scores(query, scored)
    }
}

fn normalize(mut v: SparseVector) -> SparseVector {
    let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in &mut v {
            *w /= norm;
        }
    }
    v
}

/// Dot product of two dimension-sorted sparse vectors, accumulated in
/// ascending dimension order.
pub fn sparse_dot(a: &SparseVector, b: &SparseVector) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::items;

    fn toy() -> TfidfIndex {
        TfidfIndex::build(&items(&[
            ("d1", "wet mass propellant"),
            ("d2", "camera images"),
            ("d3", "propellant tank"),
        ]))
        .unwrap()
    }

    fn weight(idx: &TfidfIndex, doc: usize, term: &str) -> f64 {
        let dim = idx.vocabulary[term];
        idx.doc_vectors[doc].iter().find(|(d, _)| *d == dim).map(|(_, w)| *w).unwrap()
    }

    #[test]
    fn single_doc_symmetric_unit() {
        let idx = TfidfIndex::build(&items(&[("x", "alpha beta")])).unwrap();
        let v = &idx.doc_vectors[0];
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].1, v[1].1);
        let norm: f64 = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rarer_term_has_larger_idf() {
        let idx = TfidfIndex::build(&items(&[("a", "common rare"), ("b", "common"), ("c", "common")])).unwrap();
        assert!(idx.idf[idx.vocabulary["rare"] as usize] > idx.idf[idx.vocabulary["common"] as usize]);
    }

    #[test]
    fn toy_weights_match_hand_table() {
        let idx = toy();
        let table = [
            (0, "mass", 0.6227660078332259),
            (0, "propellant", 0.4736296010332684),
            (0, "wet", 0.6227660078332259),
            (1, "camera", std::f64::consts::FRAC_1_SQRT_2),
            (1, "images", std::f64::consts::FRAC_1_SQRT_2),
            (2, "propellant", 0.6053485081062916),
            (2, "tank", 0.7959605415681652),
        ];
        for (doc, term, expected) in table {
            assert!((weight(&idx, doc, term) - expected).abs() < 1e-12, "{doc} {term}");
        }
        assert!((idx.idf[idx.vocabulary["propellant"] as usize] - 1.2876820724517808).abs() < 1e-12);
    }

    #[test]
    fn toy_query_ranks_d1_first() {
        let hits = toy().rank("wet mass");
        assert_eq!(hits.ids(), ["d1", "d2", "d3"]);
        assert!((hits.hits[0].score - 0.8807241344626973).abs() < 1e-12);
        assert_eq!(hits.hits[1].score, 0.0);
    }

    #[test]
    fn identity_and_orthogonality() {
        let idx = TfidfIndex::build(&items(&[("only", "spacecraft wet mass budget")])).unwrap();
        assert!((idx.rank("spacecraft wet mass budget").hits[0].score - 1.0).abs() < 1e-12);
        assert_eq!(idx.rank("orbit insertion").hits[0].score, 0.0);
    }

    #[test]
    fn unknown_query_terms_give_zero_scores_in_id_order() {
        let hits = toy().rank("zzz qqq");
        assert_eq!(hits.ids(), ["d1", "d2", "d3"]);
        assert!(hits.hits.iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let idx = TfidfIndex::build(&items(&[("e", ""), ("f", "fuel")])).unwrap();
        assert!(idx.doc_vectors[0].is_empty());
        assert_eq!(idx.rank("fuel").ids(), ["f", "e"]);
    }
}
