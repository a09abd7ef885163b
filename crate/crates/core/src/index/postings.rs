//! In-memory inverted index state.
//!
//! Maps are persistent (`im`) and posting lists are shared behind `Arc`, so
//! cloning the whole state for a reader snapshot is cheap and a writer only
//! copies the lists it touches afterwards.

use std::collections::HashMap;
use std::sync::Arc;

use super::query::IndexedField;
use super::tokenize::tokenize;
use crate::record::MetadataRecord;

pub(crate) const FIELD_COUNT: usize = 7;

/// Fields whose postings carry token positions.
pub(crate) fn is_positional(field: IndexedField) -> bool {
    !field.is_whole_value()
}

/// Slot in the whole-value maps for keywords and authors.
fn value_slot(field: IndexedField) -> Option<usize> {
    match field {
        IndexedField::Keywords => Some(0),
        IndexedField::Author => Some(1),
        _ => None,
    }
}

/// Postings for one (field, term), sorted by ordinal.
#[derive(Debug, Clone, Default)]
pub(crate) struct PostingList {
    pub docs: Vec<u32>,
    pub tfs: Vec<u32>,
    /// `positions[pos_offsets[i]..pos_offsets[i + 1]]` belong to `docs[i]`.
    /// Empty for non-positional fields.
    pub pos_offsets: Vec<u32>,
    pub positions: Vec<u32>,
}

impl PostingList {
    fn push(&mut self, doc: u32, positions: &[u32], positional: bool) {
        debug_assert!(self.docs.last().is_none_or(|&d| d < doc));
        self.docs.push(doc);
        self.tfs.push(positions.len() as u32);
        if positional {
            if self.pos_offsets.is_empty() {
                self.pos_offsets.push(0);
            }
            self.positions.extend_from_slice(positions);
            self.pos_offsets.push(self.positions.len() as u32);
        }
    }

    fn push_count(&mut self, doc: u32, count: u32) {
        self.docs.push(doc);
        self.tfs.push(count);
    }

    fn remove(&mut self, doc: u32) {
        let Ok(i) = self.docs.binary_search(&doc) else { return };
        self.docs.remove(i);
        self.tfs.remove(i);
        if !self.pos_offsets.is_empty() {
            let start = self.pos_offsets[i] as usize;
            let end = self.pos_offsets[i + 1] as usize;
            self.positions.drain(start..end);
            self.pos_offsets.remove(i + 1);
            let removed = (end - start) as u32;
            for off in &mut self.pos_offsets[i + 1..] {
                *off -= removed;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn find(&self, doc: u32) -> Option<usize> {
        self.docs.binary_search(&doc).ok()
    }

    pub fn positions_at(&self, i: usize) -> &[u32] {
        if self.pos_offsets.is_empty() {
            return &[];
        }
        &self.positions[self.pos_offsets[i] as usize..self.pos_offsets[i + 1] as usize]
    }
}

/// A record's contribution to the index.
pub(crate) struct Analyzed {
    /// Per field: term -> positions.
    pub terms: [HashMap<String, Vec<u32>>; FIELD_COUNT],
    pub lengths: [u32; FIELD_COUNT],
    /// Normalized whole keyword / author values -> occurrence count.
    pub values: [HashMap<String, u32>; 2],
}

/// Joins a value's tokens with single spaces; the key for whole-value matches.
pub(crate) fn value_key(tokens: &[String]) -> String {
    tokens.join(" ")
}

pub(crate) fn analyze(record: &MetadataRecord) -> Analyzed {
    let mut terms: [HashMap<String, Vec<u32>>; FIELD_COUNT] = Default::default();
    let mut lengths = [0u32; FIELD_COUNT];
    let mut values: [HashMap<String, u32>; 2] = Default::default();

    let mut add_value = |field: IndexedField, text: &str, start: u32| -> u32 {
        let tokens = tokenize(text);
        let slot = field.slot();
        for (i, t) in tokens.iter().enumerate() {
            terms[slot].entry(t.clone()).or_default().push(start + i as u32);
        }
        lengths[slot] += tokens.len() as u32;
        if let Some(v) = value_slot(field) {
            if !tokens.is_empty() {
                *values[v].entry(value_key(&tokens)).or_default() += 1;
            }
        }
        tokens.len() as u32
    };

    add_value(IndexedField::Title, &record.title, 0);
    add_value(IndexedField::Abstract, &record.r#abstract, 0);
    // Keyword and author positions are not used; keep them distinct anyway.
    let mut pos = 0;
    for k in &record.keywords {
        pos += add_value(IndexedField::Keywords, k, pos) + 1;
    }
    pos = 0;
    for a in &record.authors {
        pos += add_value(IndexedField::Author, a, pos) + 1;
    }
    add_value(IndexedField::Source, &record.source_id, 0);
    add_value(IndexedField::Schema, record.schema.as_str(), 0);

    // All: every title/abstract/keyword/author value in turn, one unused
    // position between values so phrases never straddle two of them.
    let mut pos = 0;
    let all_values = std::iter::once(record.title.as_str())
        .chain(std::iter::once(record.r#abstract.as_str()))
        .chain(record.keywords.iter().map(String::as_str))
        .chain(record.authors.iter().map(String::as_str));
    for v in all_values {
        let n = add_value(IndexedField::All, v, pos);
        if n > 0 {
            pos += n + 1;
        }
    }

    Analyzed { terms, lengths, values }
}

#[derive(Debug)]
pub(crate) struct DocEntry {
    pub record: Arc<MetadataRecord>,
    pub lengths: [u32; FIELD_COUNT],
}

type TermMap = im::HashMap<String, Arc<PostingList>>;

#[derive(Debug, Clone, Default)]
pub(crate) struct IndexState {
    pub docs: im::Vector<Option<Arc<DocEntry>>>,
    pub by_id: im::HashMap<String, u32>,
    pub terms: [TermMap; FIELD_COUNT],
    pub values: [TermMap; 2],
    pub total_len: [u64; FIELD_COUNT],
    pub live: usize,
}

impl IndexState {
    pub fn upsert(&mut self, record: Arc<MetadataRecord>) {
        if record.deleted {
            self.delete(&record.identifier);
            return;
        }
        self.delete(&record.identifier);
        let ordinal = self.docs.len() as u32;
        let analyzed = analyze(&record);
        for field in IndexedField::ALL_FIELDS {
            let slot = field.slot();
            let positional = is_positional(field);
            for (term, positions) in &analyzed.terms[slot] {
                let list = self.terms[slot].entry(term.clone()).or_default();
                Arc::make_mut(list).push(ordinal, positions, positional);
            }
            self.total_len[slot] += analyzed.lengths[slot] as u64;
        }
        for (v, counts) in analyzed.values.iter().enumerate() {
            for (key, count) in counts {
                let list = self.values[v].entry(key.clone()).or_default();
                Arc::make_mut(list).push_count(ordinal, *count);
            }
        }
        self.by_id.insert(record.identifier.clone(), ordinal);
        self.docs.push_back(Some(Arc::new(DocEntry { record, lengths: analyzed.lengths })));
        self.live += 1;
    }

    pub fn delete(&mut self, identifier: &str) {
        let Some(ordinal) = self.by_id.remove(identifier) else { return };
        let Some(entry) = self.docs.get(ordinal as usize).cloned().flatten() else { return };
        let analyzed = analyze(&entry.record);
        for field in IndexedField::ALL_FIELDS {
            let slot = field.slot();
            for term in analyzed.terms[slot].keys() {
                remove_from(&mut self.terms[slot], term, ordinal);
            }
            self.total_len[slot] -= entry.lengths[slot] as u64;
        }
        for (v, counts) in analyzed.values.iter().enumerate() {
            for key in counts.keys() {
                remove_from(&mut self.values[v], key, ordinal);
            }
        }
        self.docs.set(ordinal as usize, None);
        self.live -= 1;
    }

    pub fn postings(&self, field: IndexedField, term: &str) -> Option<&PostingList> {
        self.terms[field.slot()].get(term).map(|l| l.as_ref())
    }

    pub fn value_postings(&self, field: IndexedField, key: &str) -> Option<&PostingList> {
        value_slot(field).and_then(|v| self.values[v].get(key)).map(|l| l.as_ref())
    }

    pub fn doc(&self, ordinal: u32) -> Option<&Arc<DocEntry>> {
        self.docs.get(ordinal as usize).and_then(|d| d.as_ref())
    }

    pub fn live_ordinals(&self) -> Vec<u32> {
        self.docs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_some())
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn avg_len(&self, field: IndexedField) -> f64 {
        if self.live == 0 {
            return 0.0;
        }
        self.total_len[field.slot()] as f64 / self.live as f64
    }
}

fn remove_from(map: &mut TermMap, key: &str, ordinal: u32) {
    let empty = match map.get_mut(key) {
        Some(list) => {
            Arc::make_mut(list).remove(ordinal);
            list.docs.is_empty()
        }
        None => false,
    };
    if empty {
        map.remove(key);
    }
}
