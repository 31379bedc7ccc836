//! Flat `key=value` documents.
//!
//! One pair per line. Blank lines and lines starting with `#` are ignored;
//! whitespace around keys and values is trimmed. Keys must be unique.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KvError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
}

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, KvError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(KvError::Malformed {
                line: idx + 1,
                text: raw.to_string(),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError::Malformed {
                line: idx + 1,
                text: raw.to_string(),
            });
        }
        if out
            .insert(key.to_string(), value.trim().to_string())
            .is_some()
        {
            return Err(KvError::DuplicateKey {
                line: idx + 1,
                key: key.to_string(),
            });
        }
    }
    Ok(out)
}
