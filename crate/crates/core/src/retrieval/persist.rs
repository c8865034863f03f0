//! Versioned on-disk index format: a JSON object carrying a magic string, a
//! format version and the index payload.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Index, RetrievalError};

pub const INDEX_MAGIC: &str = "QASSIST-INDEX";
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexFile {
    pub magic: String,
    pub version: u32,
    pub index: Index,
}

pub fn save_index(path: &Path, index: &Index) -> Result<(), RetrievalError> {
    let file = IndexFile {
        magic: INDEX_MAGIC.to_string(),
        version: INDEX_FORMAT_VERSION,
        index: index.clone(),
    };
    let bytes = serde_json::to_vec(&file).map_err(|e| RetrievalError::Format(e.to_string()))?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<Index, RetrievalError> {
    let raw = std::fs::read(path)?;
    let header: serde_json::Value =
        serde_json::from_slice(&raw).map_err(|e| RetrievalError::Format(format!("{}: {e}", path.display())))?;
    if header.get("magic").and_then(|m| m.as_str()) != Some(INDEX_MAGIC) {
        return Err(RetrievalError::Format(format!("{}: not an index file", path.display())));
    }
    match header.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == INDEX_FORMAT_VERSION as u64 => {}
        other => {
            return Err(RetrievalError::Format(format!(
                "{}: unsupported index version {other:?}",
                path.display()
            )))
        }
    }
    let file: IndexFile =
        serde_json::from_value(header).map_err(|e| RetrievalError::Format(format!("{}: {e}", path.display())))?;
    Ok(file.index)
}
