//! Canonical record storage.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::id::{Corpus, PaperId};
use crate::record::{PaperRecord, SchemaViolation};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt record at {path}: {source}")]
    Corrupt {
        path: PathBuf,
        source: SchemaViolation,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PutOutcome {
    Inserted,
    Updated,
    Unchanged,
}

pub type ChangeListener = Arc<dyn Fn(&PaperId) + Send + Sync>;

pub trait RecordStore: Send + Sync {
    fn get(&self, id: &PaperId) -> Result<Option<Arc<PaperRecord>>, StoreError>;
    /// Replaces any stored version; listeners fire unless the canonical JSON
    /// is unchanged.
    fn put(&self, record: PaperRecord) -> Result<PutOutcome, StoreError>;
    fn remove(&self, id: &PaperId) -> Result<bool, StoreError>;
    /// All stored ids in order.
    fn ids(&self) -> Result<Vec<PaperId>, StoreError>;
    /// Called with the paper id after every effective write or removal.
    fn subscribe(&self, listener: ChangeListener);
}

#[derive(Default)]
struct Listeners(RwLock<Vec<ChangeListener>>);

impl Listeners {
    fn add(&self, l: ChangeListener) {
        self.0.write().expect("listener lock poisoned").push(l);
    }

    fn notify(&self, id: &PaperId) {
        for l in self.0.read().expect("listener lock poisoned").iter() {
            l(id);
        }
    }
}

#[derive(Default)]
pub struct MemoryStore {
    records: RwLock<BTreeMap<PaperId, Arc<PaperRecord>>>,
    listeners: Listeners,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.read().expect("store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl RecordStore for MemoryStore {
    fn get(&self, id: &PaperId) -> Result<Option<Arc<PaperRecord>>, StoreError> {
        Ok(self
            .records
            .read()
            .expect("store lock poisoned")
            .get(id)
            .cloned())
    }

    fn put(&self, record: PaperRecord) -> Result<PutOutcome, StoreError> {
        let id = record.paper_id().clone();
        let outcome = {
            let mut map = self.records.write().expect("store lock poisoned");
            let outcome = match map.get(&id) {
                None => PutOutcome::Inserted,
                Some(old) if old.to_canonical_json() == record.to_canonical_json() => {
                    PutOutcome::Unchanged
                }
                Some(_) => PutOutcome::Updated,
            };
            if outcome != PutOutcome::Unchanged {
                map.insert(id.clone(), Arc::new(record));
            }
            outcome
        };
        if outcome != PutOutcome::Unchanged {
            self.listeners.notify(&id);
        }
        Ok(outcome)
    }

    fn remove(&self, id: &PaperId) -> Result<bool, StoreError> {
        let removed = self
            .records
            .write()
            .expect("store lock poisoned")
            .remove(id)
            .is_some();
        if removed {
            self.listeners.notify(id);
        }
        Ok(removed)
    }

    fn ids(&self) -> Result<Vec<PaperId>, StoreError> {
        Ok(self
            .records
            .read()
            .expect("store lock poisoned")
            .keys()
            .cloned()
            .collect())
    }

    fn subscribe(&self, listener: ChangeListener) {
        self.listeners.add(listener);
    }
}

/// One canonical JSON file per record at `<root>/<corpus>/<id>.json`,
/// written atomically. Reads always go to disk.
pub struct FileStore {
    root: PathBuf,
    listeners: Listeners,
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| StoreError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(FileStore {
            root,
            listeners: Listeners::default(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, id: &PaperId) -> PathBuf {
        self.root.join(id.record_path())
    }

    fn read_raw(&self, id: &PaperId) -> Result<Option<String>, StoreError> {
        let path = self.path(id);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(StoreError::Io { path, source }),
        }
    }

    fn collect_ids(
        &self,
        corpus: Corpus,
        dir: &Path,
        prefix: &str,
        out: &mut Vec<PaperId>,
    ) -> Result<(), StoreError> {
        let entries = match fs::read_dir(dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
            Err(source) => {
                return Err(StoreError::Io {
                    path: dir.to_path_buf(),
                    source,
                })
            }
        };
        for entry in entries {
            let entry = entry.map_err(|source| StoreError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let path = entry.path();
            if path.is_dir() {
                // legacy arXiv ids contain a slash
                self.collect_ids(corpus, &path, &format!("{prefix}{name}/"), out)?;
            } else if let Some(stem) = name.strip_suffix(".json") {
                if let Ok(id) = PaperId::new(corpus, format!("{prefix}{stem}")) {
                    out.push(id);
                }
            }
        }
        Ok(())
    }
}

impl RecordStore for FileStore {
    fn get(&self, id: &PaperId) -> Result<Option<Arc<PaperRecord>>, StoreError> {
        let Some(text) = self.read_raw(id)? else {
            return Ok(None);
        };
        PaperRecord::from_json(&text)
            .map(|r| Some(Arc::new(r)))
            .map_err(|source| StoreError::Corrupt {
                path: self.path(id),
                source,
            })
    }

    fn put(&self, record: PaperRecord) -> Result<PutOutcome, StoreError> {
        let id = record.paper_id().clone();
        let json = record.to_canonical_json();
        let outcome = match self.read_raw(&id)? {
            None => PutOutcome::Inserted,
            Some(old) if old == json => PutOutcome::Unchanged,
            Some(_) => PutOutcome::Updated,
        };
        if outcome != PutOutcome::Unchanged {
            let path = self.path(&id);
            write_atomic(&path, json.as_bytes())
                .map_err(|source| StoreError::Io { path, source })?;
            self.listeners.notify(&id);
        }
        Ok(outcome)
    }

    fn remove(&self, id: &PaperId) -> Result<bool, StoreError> {
        let path = self.path(id);
        match fs::remove_file(&path) {
            Ok(()) => {
                self.listeners.notify(id);
                Ok(true)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(source) => Err(StoreError::Io { path, source }),
        }
    }

    fn ids(&self) -> Result<Vec<PaperId>, StoreError> {
        let mut out = Vec::new();
        for corpus in [Corpus::Arxiv, Corpus::Pmc] {
            self.collect_ids(corpus, &self.root.join(corpus.as_str()), "", &mut out)?;
        }
        out.sort();
        Ok(out)
    }

    fn subscribe(&self, listener: ChangeListener) {
        self.listeners.add(listener);
    }
}

/// Wraps a store, counting reads and optionally delaying each one.
pub struct InstrumentedStore<S> {
    inner: S,
    read_delay: Duration,
    reads: AtomicU64,
}

impl<S: RecordStore> InstrumentedStore<S> {
    pub fn new(inner: S, read_delay: Duration) -> Self {
        Self {
            inner,
            read_delay,
            reads: AtomicU64::new(0),
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: RecordStore> RecordStore for InstrumentedStore<S> {
    fn get(&self, id: &PaperId) -> Result<Option<Arc<PaperRecord>>, StoreError> {
        self.reads.fetch_add(1, Ordering::SeqCst);
        if !self.read_delay.is_zero() {
            std::thread::sleep(self.read_delay);
        }
        self.inner.get(id)
    }

    fn put(&self, record: PaperRecord) -> Result<PutOutcome, StoreError> {
        self.inner.put(record)
    }

    fn remove(&self, id: &PaperId) -> Result<bool, StoreError> {
        self.inner.remove(id)
    }

    fn ids(&self) -> Result<Vec<PaperId>, StoreError> {
        self.inner.ids()
    }

    fn subscribe(&self, listener: ChangeListener) {
        self.inner.subscribe(listener);
    }
}

impl<T: RecordStore + ?Sized> RecordStore for Arc<T> {
    fn get(&self, id: &PaperId) -> Result<Option<Arc<PaperRecord>>, StoreError> {
        (**self).get(id)
    }

    fn put(&self, record: PaperRecord) -> Result<PutOutcome, StoreError> {
        (**self).put(record)
    }

    fn remove(&self, id: &PaperId) -> Result<bool, StoreError> {
        (**self).remove(id)
    }

    fn ids(&self) -> Result<Vec<PaperId>, StoreError> {
        (**self).ids()
    }

    fn subscribe(&self, listener: ChangeListener) {
        (**self).subscribe(listener);
    }
}
