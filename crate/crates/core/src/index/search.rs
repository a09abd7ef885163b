//! Boolean evaluation, BM25 scoring, ordering and facet counting.
//!
//! Scoring: each positive `Term` or `Phrase` leaf (one not under a `Not`)
//! that matches a document adds
//!
//! ```text
//! idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
//! idf = ln(1 + (N - df + 0.5) / (df + 0.5))
//! ```
//!
//! with `k1 = 1.2`, `b = 0.75`, `N` the live record count and `dl`/`avgdl`
//! taken from the leaf's field. For a phrase, `tf` is the number of
//! occurrences (whole-value matches for keywords/authors) and `idf` is the
//! sum of its tokens' idfs. `MatchAll` adds a flat 1.0.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::postings::{value_key, IndexState, PostingList};
use super::query::{IndexedField, Query, QueryNode};
use super::{filters, FacetField, IndexError, SearchHit, SearchResult, SortOrder};
use crate::record::MetadataRecord;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const MAX_PAGE_SIZE: usize = 1000;
pub const FACET_LIMIT: usize = 10;
const SNIPPET_CHARS: usize = 200;

pub fn bm25_idf(n: f64, df: f64) -> f64 {
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

pub fn bm25_tf_norm(tf: f64, dl: f64, avgdl: f64) -> f64 {
    let ratio = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
    tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * ratio))
}

/// First 200 characters of an abstract, cut back to a word boundary, with an
/// ellipsis when anything was dropped.
pub fn snippet(text: &str) -> String {
    if text.chars().count() <= SNIPPET_CHARS {
        return text.to_string();
    }
    let cut: String = text.chars().take(SNIPPET_CHARS).collect();
    let next_is_space = text.chars().nth(SNIPPET_CHARS).is_some_and(char::is_whitespace);
    let kept = if next_is_space {
        cut.trim_end()
    } else {
        match cut.rfind(char::is_whitespace) {
            Some(i) => cut[..i].trim_end(),
            None => cut.as_str(),
        }
    };
    format!("{kept}…")
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn union(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn difference(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut j = 0;
    let mut out = Vec::with_capacity(a.len());
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j >= b.len() || b[j] != x {
            out.push(x);
        }
    }
    out
}

impl IndexState {
    /// Occurrences of a positional phrase in one document.
    fn phrase_count(&self, lists: &[&PostingList], doc: u32) -> u32 {
        let mut slots = Vec::with_capacity(lists.len());
        for l in lists {
            match l.find(doc) {
                Some(i) => slots.push(l.positions_at(i)),
                None => return 0,
            }
        }
        let (first, rest) = slots.split_first().expect("phrase has tokens");
        first
            .iter()
            .filter(|&&p| rest.iter().enumerate().all(|(k, ps)| ps.binary_search(&(p + k as u32 + 1)).is_ok()))
            .count() as u32
    }

    fn phrase_lists(&self, field: IndexedField, tokens: &[String]) -> Option<Vec<&PostingList>> {
        tokens.iter().map(|t| self.postings(field, t)).collect()
    }

    fn eval(&self, node: &QueryNode) -> Vec<u32> {
        match node {
            QueryNode::MatchAll => self.live_ordinals(),
            QueryNode::Term(field, token) => self.postings(*field, token).map(|l| l.docs.clone()).unwrap_or_default(),
            QueryNode::Phrase(field, tokens) if field.is_whole_value() => self
                .value_postings(*field, &value_key(tokens))
                .map(|l| l.docs.clone())
                .unwrap_or_default(),
            QueryNode::Phrase(field, tokens) => {
                let Some(mut lists) = self.phrase_lists(*field, tokens) else { return Vec::new() };
                let mut by_len = lists.clone();
                by_len.sort_by_key(|l| l.len());
                let mut docs = by_len[0].docs.clone();
                for l in &by_len[1..] {
                    docs = intersect(&docs, &l.docs);
                }
                lists.truncate(tokens.len());
                docs.retain(|&d| self.phrase_count(&lists, d) > 0);
                docs
            }
            QueryNode::And(children) => {
                let (neg, pos): (Vec<&QueryNode>, Vec<&QueryNode>) =
                    children.iter().partition(|c| matches!(c, QueryNode::Not(_)));
                let mut sets: Vec<Vec<u32>> = pos.iter().map(|c| self.eval(c)).collect();
                sets.sort_by_key(Vec::len);
                let mut acc = match sets.first() {
                    Some(first) => first.clone(),
                    None => self.live_ordinals(),
                };
                for s in sets.iter().skip(1) {
                    if acc.is_empty() {
                        break;
                    }
                    acc = intersect(&acc, s);
                }
                for n in neg {
                    if acc.is_empty() {
                        break;
                    }
                    let QueryNode::Not(inner) = n else { unreachable!() };
                    acc = difference(&acc, &self.eval(inner));
                }
                acc
            }
            QueryNode::Or(children) => children.iter().fold(Vec::new(), |acc, c| union(&acc, &self.eval(c))),
            QueryNode::Not(inner) => difference(&self.live_ordinals(), &self.eval(inner)),
        }
    }

    fn positive_leaves<'q>(node: &'q QueryNode, out: &mut Vec<&'q QueryNode>) {
        match node {
            QueryNode::Term(..) | QueryNode::Phrase(..) | QueryNode::MatchAll => out.push(node),
            QueryNode::And(children) | QueryNode::Or(children) => {
                for c in children {
                    Self::positive_leaves(c, out);
                }
            }
            QueryNode::Not(_) => {}
        }
    }

    /// Adds one leaf's BM25 contribution to `scores` (aligned with `candidates`).
    fn score_leaf(&self, leaf: &QueryNode, candidates: &[u32], scores: &mut [f64]) {
        let n = self.live as f64;
        let (field, idf, tf_of): (IndexedField, f64, Box<dyn Fn(u32) -> u32 + '_>) = match leaf {
            QueryNode::MatchAll => {
                scores.iter_mut().for_each(|s| *s += 1.0);
                return;
            }
            QueryNode::Term(field, token) => {
                let Some(list) = self.postings(*field, token) else { return };
                let idf = bm25_idf(n, list.len() as f64);
                (*field, idf, Box::new(move |d| list.find(d).map(|i| list.tfs[i]).unwrap_or(0)))
            }
            QueryNode::Phrase(field, tokens) => {
                let Some(lists) = self.phrase_lists(*field, tokens) else { return };
                let idf: f64 = lists.iter().map(|l| bm25_idf(n, l.len() as f64)).sum();
                if field.is_whole_value() {
                    let Some(values) = self.value_postings(*field, &value_key(tokens)) else { return };
                    (*field, idf, Box::new(move |d| values.find(d).map(|i| values.tfs[i]).unwrap_or(0)))
                } else {
                    (*field, idf, Box::new(move |d| self.phrase_count(&lists, d)))
                }
            }
            _ => return,
        };
        let avgdl = self.avg_len(field);
        for (score, &doc) in scores.iter_mut().zip(candidates) {
            let tf = tf_of(doc);
            if tf == 0 {
                continue;
            }
            let dl = self.doc(doc).map(|d| d.lengths[field.slot()]).unwrap_or(0) as f64;
            *score += idf * bm25_tf_norm(tf as f64, dl, avgdl);
        }
    }

    fn passes_filters(&self, query: &Query, record: &MetadataRecord) -> bool {
        if let Some(sf) = &query.spatial {
            match &record.bbox {
                Some(b) if filters::spatial_match(b, &sf.bbox, sf.relation) => {}
                _ => return false,
            }
        }
        if let Some(tf) = &query.temporal {
            match &record.temporal {
                Some(t) if filters::temporal_match(t, tf.start, tf.end) => {}
                _ => return false,
            }
        }
        true
    }

    /// Ordinals matching the query, ascending.
    pub fn matching(&self, query: &Query) -> Vec<u32> {
        let mut candidates = self.eval(&query.root);
        if query.spatial.is_some() || query.temporal.is_some() {
            candidates.retain(|&d| self.doc(d).is_some_and(|e| self.passes_filters(query, &e.record)));
        }
        candidates
    }

    pub fn search(
        &self,
        query: &Query,
        page: usize,
        page_size: usize,
        facet_fields: &[FacetField],
        order: SortOrder,
    ) -> Result<SearchResult, IndexError> {
        if page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(IndexError::PageOutOfRange { page_size });
        }
        let candidates = self.matching(query);
        let mut scores = vec![0.0; candidates.len()];
        let mut leaves = Vec::new();
        Self::positive_leaves(&query.root, &mut leaves);
        for leaf in leaves {
            self.score_leaf(leaf, &candidates, &mut scores);
        }

        let mut ranked: Vec<(f64, &Arc<MetadataRecord>)> = candidates
            .iter()
            .zip(&scores)
            .filter_map(|(&d, &s)| self.doc(d).map(|e| (s, &e.record)))
            .collect();

        let cmp = |a: &(f64, &Arc<MetadataRecord>), b: &(f64, &Arc<MetadataRecord>)| -> Ordering {
            match order {
                SortOrder::Relevance => b.0.total_cmp(&a.0).then_with(|| a.1.identifier.cmp(&b.1.identifier)),
                SortOrder::DatestampDesc => {
                    b.1.datestamp.cmp(&a.1.datestamp).then_with(|| a.1.identifier.cmp(&b.1.identifier))
                }
            }
        };
        let start = page.saturating_mul(page_size);
        let end = start.saturating_add(page_size).min(ranked.len());
        let hits = if start >= ranked.len() {
            Vec::new()
        } else {
            if end < ranked.len() {
                ranked.select_nth_unstable_by(end, cmp);
                ranked.truncate(end);
            }
            ranked.sort_unstable_by(cmp);
            ranked[start..end]
                .iter()
                .map(|(score, record)| {
                    let mut snippets = BTreeMap::new();
                    if !record.r#abstract.is_empty() {
                        snippets.insert(IndexedField::Abstract, snippet(&record.r#abstract));
                    }
                    SearchHit {
                        identifier: record.identifier.clone(),
                        score: *score,
                        snippets,
                        record: Arc::clone(record),
                    }
                })
                .collect()
        };

        let facets = facet_fields
            .iter()
            .map(|f| (*f, self.facet_counts(*f, &candidates)))
            .collect();

        Ok(SearchResult { total_hits: candidates.len(), hits, facets })
    }

    fn facet_counts(&self, field: FacetField, candidates: &[u32]) -> Vec<(String, usize)> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for &d in candidates {
            let Some(entry) = self.doc(d) else { continue };
            let r = &entry.record;
            match field {
                FacetField::Source => *counts.entry(r.source_id.as_str()).or_default() += 1,
                FacetField::Schema => *counts.entry(r.schema.as_str()).or_default() += 1,
                FacetField::Keywords => {
                    for k in &r.keywords {
                        *counts.entry(k.as_str()).or_default() += 1;
                    }
                }
            }
        }
        let mut out: Vec<(String, usize)> = counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out.truncate(FACET_LIMIT);
        out
    }
}
