use serde::{Deserialize, Serialize};

use super::{Hit, RankedHits};
use crate::lexicon;
use crate::plugin::{JsonPlugin, PluginError, PluginSpec};

/// Scores a (question, passage) pair jointly.
pub trait CrossScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, question: &str, passage: &str) -> Result<f64, PluginError>;
    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// Multiset F1 between the content terms of question and passage.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverlapScorer;

impl CrossScorer for OverlapScorer {
    fn name(&self) -> &str {
        "overlap"
    }

    fn score(&self, question: &str, passage: &str) -> Result<f64, PluginError> {
        Ok(lexicon::overlap_f1(
            &lexicon::content_terms(question),
            &lexicon::content_terms(passage),
        ))
    }
}

/// Re-scores the first `depth` hits of `base` with `score` and sorts them.
/// Hits below the depth keep their base order and are appended with scores
/// strictly below the smallest re-scored value. `depth` larger than the list
/// reranks everything.
pub fn rerank<E>(
    base: &RankedHits,
    depth: usize,
    mut score: impl FnMut(&str) -> Result<f64, E>,
) -> Result<RankedHits, E> {
    let depth = depth.max(1).min(base.hits.len());
    let (head, tail) = base.hits.split_at(depth);
    let mut scored = Vec::with_capacity(head.len());
    for hit in head {
        scored.push((hit.item_id.clone(), score(&hit.item_id)?));
    }
    let mut out = RankedHits::from_scores(&base.query_id, scored);
    let floor = out.hits.iter().map(|h| h.score).fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 0.0 };
    out.hits.extend(tail.iter().enumerate().map(|(i, h)| Hit {
        item_id: h.item_id.clone(),
        score: floor - (i + 1) as f64,
    }));
    Ok(out)
}

/// Cross scorer backed by a plugin: request `{question, passage_text}`,
/// response `{score}`.
#[derive(Debug)]
pub struct PluginCrossScorer {
    name: String,
    plugin: JsonPlugin,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    question: &'a str,
    passage_text: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

impl PluginCrossScorer {
    pub fn new(name: impl Into<String>, spec: PluginSpec) -> Self {
        Self {
            name: name.into(),
            plugin: JsonPlugin::new(spec),
        }
    }
}

impl CrossScorer for PluginCrossScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, question: &str, passage_text: &str) -> Result<f64, PluginError> {
        let resp: ScoreResponse = self.plugin.call(&ScoreRequest { question, passage_text })?;
        if !resp.score.is_finite() {
            return Err(PluginError::Protocol("cross scorer returned a non-finite score".into()));
        }
        Ok(resp.score)
    }

    fn concurrency_safe(&self) -> bool {
        self.plugin.concurrency_safe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::convert::Infallible;

    fn base() -> RankedHits {
        RankedHits::from_scores("q", [("A".to_string(), 3.0), ("B".to_string(), 2.0), ("C".to_string(), 1.0)])
    }

    fn lookup<'a>(m: &'a HashMap<&str, f64>) -> impl FnMut(&str) -> Result<f64, Infallible> + 'a {
        move |id| Ok(m[id])
    }

    #[test]
    fn direct_sort() {
        let s = HashMap::from([("A", 0.1), ("B", 0.9), ("C", 0.5)]);
        let out = rerank(&base(), 3, lookup(&s)).unwrap();
        assert_eq!(out.ids(), ["B", "C", "A"]);
    }

    #[test]
    fn depth_one_keeps_base_order() {
        let s = HashMap::from([("A", 0.1), ("B", 0.9), ("C", 0.5)]);
        let out = rerank(&base(), 1, lookup(&s)).unwrap();
        assert_eq!(out.ids(), ["A", "B", "C"]);
        assert!(out.hits[1].score < out.hits[0].score);
        assert!(out.hits[2].score < out.hits[1].score);
    }

    #[test]
    fn base_scores_are_idempotent() {
        let b = base();
        let s: HashMap<&str, f64> = b.hits.iter().map(|h| (h.item_id.as_str(), h.score)).collect();
        assert_eq!(rerank(&b, 3, lookup(&s)).unwrap(), b);
    }

    #[test]
    fn depth_beyond_length_reranks_all() {
        let s = HashMap::from([("A", 0.1), ("B", 0.9), ("C", 0.5)]);
        assert_eq!(rerank(&base(), 99, lookup(&s)).unwrap().ids(), ["B", "C", "A"]);
    }

    #[test]
    fn tail_sits_below_reranked_head() {
        let s = HashMap::from([("A", 5.0), ("B", -2.0), ("C", 0.0)]);
        let out = rerank(&base(), 2, lookup(&s)).unwrap();
        assert_eq!(out.ids(), ["A", "B", "C"]);
        assert!(out.hits[2].score < -2.0);
    }

    #[test]
    fn overlap_scorer() {
        let s = OverlapScorer;
        assert_eq!(s.score("wet mass", "camera images").unwrap(), 0.0);
        assert!((s.score("wet mass", "wet mass").unwrap() - 1.0).abs() < 1e-12);
    }
}
