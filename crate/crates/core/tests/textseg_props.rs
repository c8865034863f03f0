//! Property tests for passage splitting.

use proptest::prelude::*;

use qassist_core::textseg::{split_passages, split_sentences, Document, Source, SplitConfig};

fn arb_sentence() -> impl Strategy<Value = String> {
    (
        "[A-Z][a-z]{0,8}",
        prop::collection::vec(prop_oneof!["[a-z]{1,9}", "[0-9]{1,4}", Just(",".to_string())], 0..40),
        prop_oneof![Just("."), Just("!"), Just("?")],
    )
        .prop_map(|(first, rest, end)| {
            let mut s = first;
            for w in rest {
                if w != "," {
                    s.push(' ');
                }
                s.push_str(&w);
            }
            s.push_str(end);
            s
        })
}

fn arb_paragraph() -> impl Strategy<Value = String> {
    prop::collection::vec(arb_sentence(), 1..30).prop_map(|s| s.join(" "))
}

proptest! {
    #[test]
    fn passages_cover_paragraph_with_one_sentence_overlap(
        paragraphs in prop::collection::vec(arb_paragraph(), 1..4),
        budget in 1usize..200,
    ) {
        let doc = Document { id: "d".into(), paragraphs: paragraphs.clone() };
        let config = SplitConfig { token_budget: budget, ..SplitConfig::default() };
        let passages = split_passages(&doc, Source::Srs, &config);
        for (pi, para) in paragraphs.iter().enumerate() {
            let sentences = split_sentences(para);
            let lens: Vec<usize> = sentences.iter().map(|s| s.tokens.len()).collect();
            let mine: Vec<_> = passages.iter().filter(|p| p.paragraph_index == pi).collect();
            prop_assert!(!mine.is_empty());
            prop_assert_eq!(mine[0].sentence_range.0, 0);
            prop_assert_eq!(mine[mine.len() - 1].sentence_range.1, sentences.len() - 1);
            for p in &mine {
                let (a, b) = p.sentence_range;
                prop_assert_eq!(p.token_count, lens[a..=b].iter().sum::<usize>());
                prop_assert_eq!(p.oversized, p.token_count > budget);
                if p.oversized {
                    prop_assert_eq!(a, b);
                }
                prop_assert_eq!(p.text.as_str(), &para[sentences[a].byte_start..sentences[b].byte_end]);
            }
            for w in mine.windows(2) {
                let (prev, next) = (w[0].sentence_range, w[1].sentence_range);
                prop_assert!(next.1 > prev.1);
                if next.0 == prev.1 + 1 {
                    // overlap was impossible: the shared sentence plus the next one exceed the budget
                    prop_assert!(prev.0 == prev.1 || lens[prev.1] + lens[prev.1 + 1] > budget);
                } else {
                    prop_assert_eq!(next.0, prev.1);
                }
            }
        }
    }

    #[test]
    fn passage_ids_are_unique_and_ordered(paragraph in arb_paragraph(), budget in 1usize..64) {
        let doc = Document { id: "srs".into(), paragraphs: vec![paragraph] };
        let config = SplitConfig { token_budget: budget, ..SplitConfig::default() };
        let passages = split_passages(&doc, Source::Corpus, &config);
        for (i, p) in passages.iter().enumerate() {
            prop_assert_eq!(&p.id, &format!("srs#{i:04}"));
            prop_assert_eq!(p.source, Source::Corpus);
        }
    }

    #[test]
    fn sentences_tile_the_tokens(paragraph in arb_paragraph()) {
        let sentences = split_sentences(&paragraph);
        let total: usize = sentences.iter().map(|s| s.tokens.len()).sum();
        prop_assert_eq!(total, qassist_core::textseg::tokenize(&paragraph).len());
        for (i, s) in sentences.iter().enumerate() {
            prop_assert_eq!(s.index, i);
        }
    }
}
