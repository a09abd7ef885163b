//! Durable record store with a search index kept in step.
//!
//! On disk a catalog directory holds:
//!
//! - `records.snapshot`: snapshot file (see [`crate::snapshot`]) of
//!   [`StoredRecord`] lines, written by [`Catalog::compact`];
//! - `records.log`: [`StoredRecord`] JSON lines appended since the last
//!   snapshot. A torn final line (crash mid-write) is ignored on open.
//!
//! Deleted records are kept as tombstones so the OAI-PMH provider can report
//! them; they are absent from the index.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{Index, IndexSnapshot};
use crate::record::MetadataRecord;
use crate::snapshot::{self, SnapshotError};

pub const SNAPSHOT_FILE: &str = "records.snapshot";
pub const LOG_FILE: &str = "records.log";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<SnapshotError> for StoreError {
    fn from(e: SnapshotError) -> Self {
        match e {
            SnapshotError::Corrupt(m) => StoreError::Corrupt(m),
            SnapshotError::Io(e) => StoreError::Io(e),
        }
    }
}

/// A record plus the store sequence number of its last change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub seq: u64,
    pub record: Arc<MetadataRecord>,
}

/// Immutable point-in-time view of the store, ordered by identifier.
#[derive(Debug, Clone, Default)]
pub struct StoreView {
    records: im::OrdMap<String, StoredRecord>,
    seq: u64,
    live: usize,
}

impl StoreView {
    /// Sequence number of the latest change visible in this view.
    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn get(&self, identifier: &str) -> Option<&StoredRecord> {
        self.records.get(identifier)
    }

    /// All entries, tombstones included, by identifier.
    pub fn iter(&self) -> impl Iterator<Item = &StoredRecord> {
        self.records.values()
    }

    /// Entries with identifier strictly greater than `after`.
    pub fn iter_after<'a>(&'a self, after: &str) -> impl Iterator<Item = &'a StoredRecord> + 'a {
        use std::ops::Bound;
        self.records
            .range::<_, str>((Bound::Excluded(after), Bound::Unbounded))
            .map(|(_, v)| v)
    }

    /// Count including tombstones.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn live_count(&self) -> usize {
        self.live
    }

    pub fn earliest_datestamp(&self) -> Option<DateTime<Utc>> {
        self.records.values().map(|r| r.record.datestamp).min()
    }
}

struct Writer {
    dir: Option<PathBuf>,
    log: Option<File>,
}

/// Record store and index behind one writer.
pub struct Catalog {
    writer: Mutex<Writer>,
    view: RwLock<StoreView>,
    index: Index,
}

impl std::fmt::Debug for Catalog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let view = self.view();
        f.debug_struct("Catalog").field("records", &view.len()).field("seq", &view.seq()).finish()
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Self::in_memory()
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Catalog {
    pub fn in_memory() -> Self {
        Catalog {
            writer: Mutex::new(Writer { dir: None, log: None }),
            view: RwLock::new(StoreView::default()),
            index: Index::new(),
        }
    }

    /// Opens (creating if needed) a catalog directory and rebuilds the index.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut view = StoreView::default();
        let snap_path = dir.join(SNAPSHOT_FILE);
        if snap_path.exists() {
            for entry in snapshot::load::<StoredRecord>(&snap_path)? {
                apply_to_view(&mut view, entry);
            }
        }
        let log_path = dir.join(LOG_FILE);
        if log_path.exists() {
            let mut valid_len = 0u64;
            let reader = BufReader::new(File::open(&log_path)?);
            for line in reader.split(b'\n') {
                let line = line?;
                match serde_json::from_slice::<StoredRecord>(&line) {
                    Ok(entry) => {
                        valid_len += line.len() as u64 + 1;
                        apply_to_view(&mut view, entry);
                    }
                    Err(_) => break,
                }
            }
            let file = OpenOptions::new().write(true).open(&log_path)?;
            if file.metadata()?.len() > valid_len {
                tracing::warn!(path = %log_path.display(), "dropping torn tail of record log");
                file.set_len(valid_len)?;
            }
        }
        let index = Index::new();
        index.upsert_many_arc(view.records.values().map(|e| Arc::clone(&e.record)));
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        Ok(Catalog {
            writer: Mutex::new(Writer { dir: Some(dir), log: Some(log) }),
            view: RwLock::new(view),
            index,
        })
    }

    pub fn dir(&self) -> Option<PathBuf> {
        lock(&self.writer).dir.clone()
    }

    pub fn view(&self) -> StoreView {
        self.view.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn search_snapshot(&self) -> IndexSnapshot {
        self.index.snapshot()
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn get(&self, identifier: &str) -> Option<Arc<MetadataRecord>> {
        self.view().get(identifier).map(|e| Arc::clone(&e.record))
    }

    pub fn live_count(&self) -> usize {
        self.view.read().unwrap_or_else(|p| p.into_inner()).live
    }

    /// Stores a record (or tombstone) durably, then updates the index.
    pub fn apply(&self, record: MetadataRecord) -> Result<(), StoreError> {
        self.apply_batch([record])
    }

    pub fn apply_batch(&self, records: impl IntoIterator<Item = MetadataRecord>) -> Result<(), StoreError> {
        let mut w = lock(&self.writer);
        let mut view = self.view();
        let mut changed = Vec::new();
        for record in records {
            let entry = StoredRecord { seq: view.seq + 1, record: Arc::new(record) };
            if let Some(log) = w.log.as_mut() {
                let mut line = serde_json::to_vec(&entry).expect("records serialize");
                line.push(b'\n');
                log.write_all(&line)?;
            }
            changed.push(Arc::clone(&entry.record));
            apply_to_view(&mut view, entry);
        }
        if let Some(log) = w.log.as_mut() {
            log.flush()?;
        }
        for r in changed {
            if r.deleted {
                self.index.delete(&r.identifier);
            } else {
                self.index.upsert_arc(r);
            }
        }
        *self.view.write().unwrap_or_else(|p| p.into_inner()) = view;
        Ok(())
    }

    /// Forces the record log to stable storage.
    pub fn sync(&self) -> Result<(), StoreError> {
        if let Some(log) = lock(&self.writer).log.as_mut() {
            log.sync_data()?;
        }
        Ok(())
    }

    /// Writes a fresh snapshot and empties the log.
    pub fn compact(&self) -> Result<(), StoreError> {
        let mut w = lock(&self.writer);
        let Some(dir) = w.dir.clone() else { return Ok(()) };
        let view = self.view();
        snapshot::save(&dir.join(SNAPSHOT_FILE), view.iter())?;
        let log = OpenOptions::new().create(true).write(true).truncate(true).open(dir.join(LOG_FILE))?;
        log.sync_all()?;
        w.log = Some(OpenOptions::new().append(true).open(dir.join(LOG_FILE))?);
        Ok(())
    }

    /// Checks the catalog directory accepts writes.
    pub fn check_writable(&self) -> Result<(), StoreError> {
        let Some(dir) = self.dir() else { return Ok(()) };
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"ok")?;
        fs::remove_file(&probe)?;
        Ok(())
    }
}

fn apply_to_view(view: &mut StoreView, entry: StoredRecord) {
    view.seq = view.seq.max(entry.seq);
    let live_now = !entry.record.deleted;
    let was_live = view
        .records
        .insert(entry.record.identifier.clone(), entry)
        .is_some_and(|old| !old.record.deleted);
    match (was_live, live_now) {
        (false, true) => view.live += 1,
        (true, false) => view.live -= 1,
        _ => {}
    }
}
