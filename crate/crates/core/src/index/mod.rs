//! Embedded inverted index with fielded boolean queries, spatial and temporal
//! filters, BM25 ranking and facet counts.
//!
//! Writes are serialized through [`Index`]; searches run against an
//! [`IndexSnapshot`], an immutable point-in-time view that stays valid while
//! the writer continues.

mod filters;
mod postings;
pub mod query;
mod search;
mod tokenize;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filters::{spatial_match, temporal_match};
pub use query::{parse_query, IndexedField, Query, QueryError, QueryNode, SpatialFilter, SpatialRelation, TemporalFilter};
pub use search::{bm25_idf, bm25_tf_norm, snippet, BM25_B, BM25_K1, FACET_LIMIT, MAX_PAGE_SIZE};
pub use tokenize::tokenize;

use crate::record::MetadataRecord;
use crate::snapshot::{self, SnapshotError};
use postings::IndexState;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("page size {page_size} outside 1..={max}", max = MAX_PAGE_SIZE)]
    PageOutOfRange { page_size: usize },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<SnapshotError> for IndexError {
    fn from(e: SnapshotError) -> Self {
        match e {
            SnapshotError::Corrupt(m) => IndexError::CorruptSnapshot(m),
            SnapshotError::Io(e) => IndexError::Io(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FacetField {
    Source,
    Schema,
    Keywords,
}

impl FacetField {
    pub const ALL: [FacetField; 3] = [FacetField::Source, FacetField::Schema, FacetField::Keywords];

    pub fn name(self) -> &'static str {
        match self {
            FacetField::Source => "source",
            FacetField::Schema => "schema",
            FacetField::Keywords => "keywords",
        }
    }

    pub fn from_name(name: &str) -> Option<FacetField> {
        Self::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for FacetField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SortOrder {
    /// Score descending, identifier ascending.
    #[default]
    Relevance,
    /// Datestamp descending, identifier ascending.
    DatestampDesc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub identifier: String,
    pub score: f64,
    pub snippets: BTreeMap<IndexedField, String>,
    pub record: Arc<MetadataRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchResult {
    pub total_hits: usize,
    pub hits: Vec<SearchHit>,
    pub facets: BTreeMap<FacetField, Vec<(String, usize)>>,
}

/// Immutable view of the index at one point in time.
#[derive(Debug, Clone)]
pub struct IndexSnapshot(Arc<IndexState>);

impl IndexSnapshot {
    pub fn search(
        &self,
        query: &Query,
        page: usize,
        page_size: usize,
        facet_fields: &[FacetField],
    ) -> Result<SearchResult, IndexError> {
        self.0.search(query, page, page_size, facet_fields, SortOrder::Relevance)
    }

    pub fn search_sorted(
        &self,
        query: &Query,
        page: usize,
        page_size: usize,
        facet_fields: &[FacetField],
        order: SortOrder,
    ) -> Result<SearchResult, IndexError> {
        self.0.search(query, page, page_size, facet_fields, order)
    }

    /// Identifiers of every matching record, ascending; no scoring.
    pub fn matching_ids(&self, query: &Query) -> Vec<String> {
        let mut ids: Vec<String> = self
            .0
            .matching(query)
            .into_iter()
            .filter_map(|d| self.0.doc(d).map(|e| e.record.identifier.clone()))
            .collect();
        ids.sort();
        ids
    }

    pub fn get(&self, identifier: &str) -> Option<Arc<MetadataRecord>> {
        let ordinal = *self.0.by_id.get(identifier)?;
        self.0.doc(ordinal).map(|e| Arc::clone(&e.record))
    }

    pub fn len(&self) -> usize {
        self.0.live
    }

    pub fn is_empty(&self) -> bool {
        self.0.live == 0
    }

    /// Live records sorted by identifier.
    pub fn records(&self) -> Vec<Arc<MetadataRecord>> {
        let mut out: Vec<_> = self.0.docs.iter().flatten().map(|e| Arc::clone(&e.record)).collect();
        out.sort_by(|a, b| a.identifier.cmp(&b.identifier));
        out
    }

    /// Writes the live records as a snapshot file.
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let records = self.records();
        Ok(snapshot::save(path, records.iter().map(|r| r.as_ref()))?)
    }
}

/// Single-writer, multi-reader index.
///
/// Readers obtain snapshots with [`Index::snapshot`]; a snapshot is only
/// materialized when a reader asks after a write, so bulk loads do not pay
/// for copy-on-write of posting lists they will touch again.
#[derive(Debug, Default)]
pub struct Index {
    writer: Mutex<IndexState>,
    published: RwLock<Arc<IndexState>>,
    dirty: AtomicBool,
}

impl Index {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = MetadataRecord>) -> Self {
        let index = Self::new();
        index.upsert_many(records);
        index
    }

    fn write<R>(&self, f: impl FnOnce(&mut IndexState) -> R) -> R {
        let mut state = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let out = f(&mut state);
        self.dirty.store(true, Ordering::Release);
        out
    }

    /// Deleted records are treated as a delete of their identifier.
    pub fn upsert(&self, record: MetadataRecord) {
        self.upsert_arc(Arc::new(record));
    }

    pub fn upsert_arc(&self, record: Arc<MetadataRecord>) {
        self.write(|s| s.upsert(record));
    }

    pub fn upsert_many(&self, records: impl IntoIterator<Item = MetadataRecord>) {
        self.write(|s| {
            for r in records {
                s.upsert(Arc::new(r));
            }
        });
    }

    pub fn upsert_many_arc(&self, records: impl IntoIterator<Item = Arc<MetadataRecord>>) {
        self.write(|s| records.into_iter().for_each(|r| s.upsert(r)));
    }

    pub fn delete(&self, identifier: &str) {
        self.write(|s| s.delete(identifier));
    }

    pub fn clear(&self) {
        self.write(|s| *s = IndexState::default());
    }

    pub fn snapshot(&self) -> IndexSnapshot {
        if self.dirty.load(Ordering::Acquire) {
            let state = self.writer.lock().unwrap_or_else(|p| p.into_inner());
            if self.dirty.swap(false, Ordering::AcqRel) {
                *self.published.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(state.clone());
            }
        }
        IndexSnapshot(Arc::clone(&self.published.read().unwrap_or_else(|p| p.into_inner())))
    }

    pub fn search(
        &self,
        query: &Query,
        page: usize,
        page_size: usize,
        facet_fields: &[FacetField],
    ) -> Result<SearchResult, IndexError> {
        self.snapshot().search(query, page, page_size, facet_fields)
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot_save(&self, path: &Path) -> Result<(), IndexError> {
        self.snapshot().save(path)
    }

    /// Rebuilds an index from a snapshot file.
    pub fn snapshot_load(path: &Path) -> Result<Index, IndexError> {
        Ok(Index::from_records(snapshot::load(path)?))
    }
}
