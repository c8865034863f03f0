//! Rendering command results.

use anyhow::Result;
use clap::ValueEnum;
use qassist_core::pipeline::{QAHit, QAResult};
use qassist_core::textseg::Passage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn one_line(s: &str, max: usize) -> String {
    let flat = s.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= max {
        flat
    } else {
        let cut: String = flat.chars().take(max.saturating_sub(3)).collect();
        format!("{cut}...")
    }
}

pub fn passages(passages: &[Passage], format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(passages)? + "\n",
        Format::Csv => {
            let mut out = String::from("id,doc_id,paragraph,first_sentence,last_sentence,tokens,oversized,text\n");
            for p in passages {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    csv_field(&p.id),
                    csv_field(&p.doc_id),
                    p.paragraph_index,
                    p.sentence_range.0,
                    p.sentence_range.1,
                    p.token_count,
                    p.oversized,
                    csv_field(&p.text)
                ));
            }
            out
        }
        Format::Table => {
            let mut out = format!("{:<16} {:>5} {:>9} {:>6}  text\n", "id", "para", "sentences", "tokens");
            for p in passages {
                out.push_str(&format!(
                    "{:<16} {:>5} {:>9} {:>6}  {}\n",
                    p.id,
                    p.paragraph_index,
                    format!("{}-{}", p.sentence_range.0, p.sentence_range.1),
                    p.token_count,
                    one_line(&p.text, 60)
                ));
            }
            out
        }
    })
}

fn answer_text(h: &QAHit) -> &str {
    h.answer.as_ref().map_or("", |a| a.text.as_str())
}

pub fn answer(result: &QAResult, format: Format) -> Result<String> {
    let sides = [("srs", &result.srs_hits), ("corpus", &result.corpus_hits)];
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(result)? + "\n",
        Format::Csv => {
            let mut out = String::from("source,rank,passage_id,score,answer\n");
            for (source, hits) in sides {
                for h in hits.iter() {
                    out.push_str(&format!(
                        "{source},{},{},{},{}\n",
                        h.rank,
                        csv_field(&h.passage.id),
                        h.score,
                        csv_field(answer_text(h))
                    ));
                }
            }
            out
        }
        Format::Table => {
            let mut out = format!("question: {}\n", result.question);
            for (source, hits) in sides {
                out.push_str(&format!("\n{source} passages\n"));
                if source == "corpus" && result.corpus_missing {
                    out.push_str("  (no domain corpus)\n");
                    continue;
                }
                if source == "corpus" && !result.retrieved_doc_ids.is_empty() {
                    out.push_str(&format!("  documents: {}\n", result.retrieved_doc_ids.join(", ")));
                }
                for h in hits.iter() {
                    out.push_str(&format!("  {}. {} ({:.4})\n", h.rank, h.passage.id, h.score));
                    out.push_str(&format!("     answer: {}\n", answer_text(h)));
                    out.push_str(&format!("     {}\n", one_line(&h.passage.text, 100)));
                }
            }
            for w in &result.warnings {
                out.push_str(&format!("\nwarning: {w}\n"));
            }
            out
        }
    })
}
