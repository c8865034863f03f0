//! Projects: their inputs, build state and on-disk layout.
//!
//! A persisted project is a directory holding `manifest.json` (the inputs),
//! `srs_passages.json`, `srs_index.json` and, when the corpus is not empty,
//! `corpus_index.json`. The manifest is written last, so a directory without
//! one is an interrupted build and is ignored on load.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use qassist_core::pipeline::{Engine, PipelineConfig, PipelineError, PreparedCorpus, PreparedSrs};
use qassist_core::retrieval::{load_index, save_index, Corpus, RetrievalError};
use qassist_core::textseg::{Document, Passage};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";
const PASSAGES_FILE: &str = "srs_passages.json";
const SRS_INDEX_FILE: &str = "srs_index.json";
const CORPUS_INDEX_FILE: &str = "corpus_index.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Index(#[from] RetrievalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}: stored passages do not match the stored index")]
    Inconsistent(PathBuf),
}

/// Everything needed to rebuild a project from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub name: String,
    pub srs: Document,
    pub corpus: Corpus,
    pub config: PipelineConfig,
}

/// A project ready to answer questions.
#[derive(Debug)]
pub struct Prepared {
    pub engine: Engine,
    pub srs: PreparedSrs,
    pub corpus: PreparedCorpus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum ProjectStatus {
    Indexing,
    Ready { passages: usize, corpus_documents: usize },
    Failed { error: String },
}

#[derive(Debug, Clone)]
pub(crate) enum State {
    Indexing,
    Ready(Arc<Prepared>),
    Failed(String),
}

#[derive(Debug)]
pub struct Project {
    pub manifest: Manifest,
    state: RwLock<State>,
}

impl Project {
    pub(crate) fn state(&self) -> State {
        self.state.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub(crate) fn set_state(&self, state: State) {
        *self.state.write().unwrap_or_else(|p| p.into_inner()) = state;
    }

    pub fn status(&self) -> ProjectStatus {
        match self.state() {
            State::Indexing => ProjectStatus::Indexing,
            State::Ready(p) => ProjectStatus::Ready {
                passages: p.srs.passages.len(),
                corpus_documents: p.corpus.corpus.size(),
            },
            State::Failed(error) => ProjectStatus::Failed { error },
        }
    }
}

/// Splits and indexes a project's inputs.
pub fn build(manifest: &Manifest) -> Result<Prepared, StoreError> {
    let engine = Engine::from_config(manifest.config.clone())?;
    let srs = engine.prepare_srs(&manifest.srs)?;
    let corpus = engine.prepare_corpus(manifest.corpus.clone())?;
    Ok(Prepared { engine, srs, corpus })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), StoreError> {
    let bytes = serde_json::to_vec(value).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes)
        .and_then(|()| std::fs::rename(&tmp, path))
        .map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let bytes = std::fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save(dir: &Path, manifest: &Manifest, prepared: &Prepared) -> Result<(), StoreError> {
    std::fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_json(&dir.join(PASSAGES_FILE), &prepared.srs.passages)?;
    save_index(&dir.join(SRS_INDEX_FILE), &prepared.srs.index)?;
    let corpus_index = dir.join(CORPUS_INDEX_FILE);
    match &prepared.corpus.index {
        Some(index) => save_index(&corpus_index, index)?,
        None if corpus_index.exists() => std::fs::remove_file(&corpus_index).map_err(|source| StoreError::Io {
            path: corpus_index.clone(),
            source,
        })?,
        None => {}
    }
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

/// Restores a saved project without re-indexing.
pub fn load(dir: &Path) -> Result<(Manifest, Prepared), StoreError> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let engine = Engine::from_config(manifest.config.clone())?;
    let passages: Vec<Passage> = read_json(&dir.join(PASSAGES_FILE))?;
    let index = load_index(&dir.join(SRS_INDEX_FILE))?;
    if index.len() != passages.len() || passages.is_empty() {
        return Err(StoreError::Inconsistent(dir.to_path_buf()));
    }
    let corpus_index_path = dir.join(CORPUS_INDEX_FILE);
    let corpus_index = if corpus_index_path.exists() {
        Some(load_index(&corpus_index_path)?)
    } else {
        None
    };
    let corpus = PreparedCorpus::from_parts(manifest.corpus.clone(), corpus_index)?;
    let srs = PreparedSrs {
        doc_id: manifest.srs.id.clone(),
        passages,
        index,
        split_ms: 0.0,
    };
    Ok((manifest, Prepared { engine, srs, corpus }))
}

/// The set of projects, optionally backed by a data directory.
#[derive(Debug, Default)]
pub struct Registry {
    projects: RwLock<BTreeMap<String, Arc<Project>>>,
    data_dir: Option<PathBuf>,
    next_id: AtomicU64,
}

impl Registry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a data directory, restoring every complete project in it.
    /// Projects whose index files cannot be read are rebuilt from their
    /// manifest.
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(data_dir).map_err(|source| StoreError::Io {
            path: data_dir.to_path_buf(),
            source,
        })?;
        let registry = Self {
            data_dir: Some(data_dir.to_path_buf()),
            ..Self::default()
        };
        let entries = std::fs::read_dir(data_dir).map_err(|source| StoreError::Io {
            path: data_dir.to_path_buf(),
            source,
        })?;
        let mut dirs: Vec<PathBuf> = entries.filter_map(Result::ok).map(|e| e.path()).filter(|p| p.is_dir()).collect();
        dirs.sort();
        let mut max_id = 0;
        for dir in dirs {
            if !dir.join(MANIFEST_FILE).exists() {
                continue;
            }
            let (manifest, state) = match load(&dir) {
                Ok((m, p)) => (m, State::Ready(Arc::new(p))),
                Err(e) => {
                    tracing::warn!(dir = %dir.display(), error = %e, "stored index unusable, rebuilding");
                    let manifest: Manifest = match read_json(&dir.join(MANIFEST_FILE)) {
                        Ok(m) => m,
                        Err(e) => {
                            tracing::warn!(error = %e, "skipping project");
                            continue;
                        }
                    };
                    let state = match build(&manifest).and_then(|p| save(&dir, &manifest, &p).map(|()| p)) {
                        Ok(p) => State::Ready(Arc::new(p)),
                        Err(e) => State::Failed(e.to_string()),
                    };
                    (manifest, state)
                }
            };
            if let Some(n) = manifest.id.strip_prefix('p').and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            let project = Arc::new(Project {
                manifest,
                state: RwLock::new(state),
            });
            registry.insert(project);
        }
        registry.next_id.store(max_id, Ordering::SeqCst);
        Ok(registry)
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn next_id(&self) -> String {
        format!("p{:04}", self.next_id.fetch_add(1, Ordering::SeqCst) + 1)
    }

    fn insert(&self, project: Arc<Project>) {
        self.projects
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(project.manifest.id.clone(), project);
    }

    /// Registers a new project in the indexing state.
    pub fn add(&self, manifest: Manifest) -> Arc<Project> {
        let project = Arc::new(Project {
            manifest,
            state: RwLock::new(State::Indexing),
        });
        self.insert(project.clone());
        project
    }

    pub fn get(&self, id: &str) -> Option<Arc<Project>> {
        self.projects.read().unwrap_or_else(|p| p.into_inner()).get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.projects.read().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds the project's indexes and persists them when a data
    /// directory is configured. Blocking; run it off the async runtime.
    pub fn build_project(&self, project: &Project) {
        let result = build(&project.manifest).and_then(|prepared| {
            if let Some(dir) = &self.data_dir {
                save(&dir.join(&project.manifest.id), &project.manifest, &prepared)?;
            }
            Ok(prepared)
        });
        match result {
            Ok(p) => project.set_state(State::Ready(Arc::new(p))),
            Err(e) => {
                tracing::warn!(project = %project.manifest.id, error = %e, "index build failed");
                project.set_state(State::Failed(e.to_string()));
            }
        }
    }
}
