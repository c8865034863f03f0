//! Reading the files the commands take.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use qassist_core::evalharness::ExperimentSpec;
use qassist_core::pipeline::PipelineConfig;
use qassist_core::retrieval::Corpus;
use qassist_core::textseg::Document;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::PipelineArgs;

/// Invalid arguments, configuration or inputs; exits with status 2.
#[derive(Debug)]
pub struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(e: impl fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

fn parse_by_extension<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|x| x == "toml") {
        toml::from_str(&raw).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&raw).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn load_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut config: PipelineConfig = match &args.config {
        Some(p) => parse_by_extension(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(b) = args.budget {
        config.token_budget = b;
    }
    config.validate().map_err(usage)?;
    Ok(config)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    experiment: Vec<ExperimentSpec>,
}

/// The experiments to run; a single default run when no file is given.
pub fn load_matrix(path: Option<&Path>) -> Result<Vec<ExperimentSpec>> {
    let Some(path) = path else {
        return Ok(vec![ExperimentSpec {
            name: "default".into(),
            config: PipelineConfig::default(),
        }]);
    };
    let m: MatrixFile = parse_by_extension(path)?;
    if m.experiment.is_empty() {
        return Err(usage(format!("{}: no experiments", path.display())));
    }
    for e in &m.experiment {
        e.config.validate().map_err(|err| usage(format!("experiment `{}`: {err}", e.name)))?;
    }
    Ok(m.experiment)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "srs".into())
}

fn documents_in(path: &Path) -> Result<Vec<Document>> {
    let raw = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|x| x == "jsonl") {
        Document::from_jsonl(raw.as_bytes()).map_err(|e| usage(format!("{}: {e}", path.display())))
    } else {
        Ok(vec![Document::from_plain_text(file_stem(path), &raw)])
    }
}

/// One SRS from a `.txt` file (id from the file stem) or a single-document
/// `.jsonl` paragraph file.
pub fn load_srs(path: &Path) -> Result<Document> {
    let mut docs = documents_in(path)?;
    if docs.len() != 1 {
        return Err(usage(format!("{}: expected one document, found {}", path.display(), docs.len())));
    }
    let doc = docs.remove(0);
    if doc.is_empty() {
        return Err(usage(format!("{}: the SRS is empty", path.display())));
    }
    Ok(doc)
}

/// Every `.txt` and `.jsonl` SRS in a directory (in file-name order), or a
/// single file.
pub fn load_srs_group(path: &Path) -> Result<Vec<Document>> {
    let docs = if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "txt" || x == "jsonl"))
            .collect();
        files.sort();
        let mut docs = Vec::new();
        for f in files {
            docs.extend(documents_in(&f)?);
        }
        docs
    } else {
        documents_in(path)?
    };
    let docs: Vec<Document> = docs.into_iter().filter(|d| !d.is_empty()).collect();
    if docs.is_empty() {
        return Err(usage(format!("{}: no SRS text found", path.display())));
    }
    Ok(docs)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    Corpus::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn empty_corpus(domain: &str) -> Corpus {
    Corpus {
        domain: domain.to_string(),
        documents: Vec::new(),
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    std::fs::write(path, s + "\n").with_context(|| format!("writing {}", path.display()))
}
