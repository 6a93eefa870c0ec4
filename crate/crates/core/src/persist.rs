//! Document files: UTF-8 JSON with sorted keys, `schema_version` 1.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::document::{CanvasDocument, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion { found: u64 },
}

/// Serializes any value with object keys in sorted order. serde_json's
/// default map is ordered, so a round trip through `Value` is enough.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("document types serialize");
    serde_json::to_string_pretty(&v).expect("value serializes")
}

pub fn to_json(doc: &CanvasDocument) -> String {
    to_canonical_json(doc)
}

pub fn from_json(text: &str) -> Result<CanvasDocument, PersistError> {
    let v: Value = serde_json::from_str(text).map_err(|e| PersistError::Malformed(e.to_string()))?;
    match v.get("schema_version").and_then(Value::as_u64) {
        Some(n) if n == u64::from(SCHEMA_VERSION) => {}
        Some(found) => return Err(PersistError::UnsupportedVersion { found }),
        None => return Err(PersistError::Malformed("missing schema_version".into())),
    }
    serde_json::from_value(v).map_err(|e| PersistError::Malformed(e.to_string()))
}

/// Writes via a temporary sibling file and rename, so a crash never leaves a
/// half-written document behind.
pub fn save(doc: &CanvasDocument, path: impl AsRef<Path>) -> Result<(), PersistError> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, to_json(doc))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<CanvasDocument, PersistError> {
    from_json(&fs::read_to_string(path)?)
}
