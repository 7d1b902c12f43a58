use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

use crate::policy::{FieldError, PolicyDocument};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("corrupt policy store {path} at line {line}, column {column} (byte {offset}): {message}")]
    CorruptStore {
        path: PathBuf,
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("policy store {path} holds an invalid policy: {}", .errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidStoredPolicy {
        path: PathBuf,
        errors: Vec<FieldError>,
    },
    #[error("i/o error on policy store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum PutError {
    #[error("validation failed")]
    ValidationFailed(Vec<FieldError>),
    #[error("stale version {offered}: current is {current}")]
    StaleVersion { current: u64, offered: u64 },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Byte offset of a 1-based (line, column) position.
fn offset_of(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Reads and validates a persisted policy.
pub fn load_store(path: &Path) -> Result<PolicyDocument, StoreError> {
    let bytes = fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8_lossy(&bytes);
    let doc: PolicyDocument = serde_json::from_str(&text).map_err(|e| StoreError::CorruptStore {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        offset: offset_of(&text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let errors = doc.violations();
    if !errors.is_empty() {
        return Err(StoreError::InvalidStoredPolicy {
            path: path.to_path_buf(),
            errors,
        });
    }
    Ok(doc)
}

/// Writes to a sibling temp file, syncs, then renames over `path`, so a
/// crash leaves either the old or the new document.
pub fn persist_store(path: &Path, doc: &PolicyDocument) -> Result<(), StoreError> {
    let io = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "policy.json".into());
    let tmp = dir.join(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(&doc.to_json_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

/// A document together with the exact bytes served for it.
#[derive(Debug)]
pub struct StoredPolicy {
    pub doc: PolicyDocument,
    pub bytes: Vec<u8>,
}

/// In-memory current policy with optional file persistence.
///
/// Readers clone an `Arc` under a read lock, so they always hold a whole
/// document. Writers serialize on a separate mutex, persist, and only then
/// swap the pointer.
#[derive(Debug, Default)]
pub struct PolicyStore {
    path: Option<PathBuf>,
    current: RwLock<Option<Arc<StoredPolicy>>>,
    writer: Mutex<()>,
}

impl PolicyStore {
    pub fn in_memory() -> Self {
        PolicyStore::default()
    }

    /// Opens a file-backed store. A missing file yields an empty store; a
    /// corrupt or invalid one is an error.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let current = if path.exists() {
            let doc = load_store(&path)?;
            Some(Arc::new(StoredPolicy {
                bytes: doc.to_json_bytes(),
                doc,
            }))
        } else {
            None
        };
        Ok(PolicyStore {
            path: Some(path),
            current: RwLock::new(current),
            writer: Mutex::new(()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self) -> Option<Arc<StoredPolicy>> {
        self.current.read().expect("policy lock poisoned").clone()
    }

    pub fn current_version(&self) -> Option<u64> {
        self.get().map(|p| p.doc.version)
    }

    pub fn put(&self, doc: PolicyDocument) -> Result<u64, PutError> {
        let errors = doc.violations();
        if !errors.is_empty() {
            return Err(PutError::ValidationFailed(errors));
        }
        let _guard = self.writer.lock().expect("writer lock poisoned");
        if let Some(current) = self.current_version() {
            if doc.version <= current {
                return Err(PutError::StaleVersion {
                    current,
                    offered: doc.version,
                });
            }
        }
        if let Some(path) = &self.path {
            persist_store(path, &doc)?;
        }
        let version = doc.version;
        let stored = Arc::new(StoredPolicy {
            bytes: doc.to_json_bytes(),
            doc,
        });
        *self.current.write().expect("policy lock poisoned") = Some(stored);
        Ok(version)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::tests::bts_ap_policy;

    fn versioned(v: u64) -> PolicyDocument {
        let mut p = bts_ap_policy();
        p.version = v;
        p
    }

    #[test]
    fn put_get_and_staleness() {
        let store = PolicyStore::in_memory();
        assert!(store.get().is_none());
        assert_eq!(store.put(versioned(1)).unwrap(), 1);
        assert_eq!(store.get().unwrap().doc.version, 1);
        assert_eq!(store.put(versioned(2)).unwrap(), 2);
        assert_eq!(store.get().unwrap().doc, versioned(2));
        assert!(matches!(
            store.put(versioned(1)),
            Err(PutError::StaleVersion { current: 2, offered: 1 })
        ));
        assert!(matches!(store.put(versioned(2)), Err(PutError::StaleVersion { .. })));
    }

    #[test]
    fn invalid_put_rejected() {
        let store = PolicyStore::in_memory();
        let mut bad = versioned(1);
        bad.price_weights = vec![crate::policy::PriceWeight {
            substrate: 0,
            weight: -2.0,
        }];
        match store.put(bad) {
            Err(PutError::ValidationFailed(f)) => assert_eq!(f[0].field, "price_weight"),
            other => panic!("{other:?}"),
        }
        assert!(store.get().is_none());
    }

    #[test]
    fn persist_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        persist_store(&path, &versioned(3)).unwrap();
        assert_eq!(load_store(&path).unwrap(), versioned(3));

        let store = PolicyStore::open(&path).unwrap();
        assert_eq!(store.current_version(), Some(3));
        store.put(versioned(4)).unwrap();
        assert_eq!(PolicyStore::open(&path).unwrap().current_version(), Some(4));
        assert!(!dir.path().join(".policy.json.tmp").exists());
    }

    #[test]
    fn empty_and_truncated_files_are_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        fs::write(&path, b"").unwrap();
        assert!(matches!(load_store(&path), Err(StoreError::CorruptStore { .. })));
        assert!(PolicyStore::open(&path).is_err());

        let full = versioned(2).to_json_bytes();
        // Every proper prefix must be rejected, with an offset inside the prefix.
        for cut in (0..full.len() - 1).step_by(7) {
            fs::write(&path, &full[..cut]).unwrap();
            match load_store(&path) {
                Err(StoreError::CorruptStore { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn stored_invalid_policy_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        let mut bad = versioned(1);
        bad.control_period = 0;
        fs::write(&path, bad.to_json_bytes()).unwrap();
        assert!(matches!(
            load_store(&path),
            Err(StoreError::InvalidStoredPolicy { .. })
        ));
    }

    #[test]
    fn offsets() {
        assert_eq!(offset_of("ab\ncd", 2, 2), 4);
        assert_eq!(offset_of("ab\ncd", 1, 1), 0);
        assert_eq!(offset_of("", 1, 0), 0);
    }
}
