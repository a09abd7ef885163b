//! Brute-force reference implementations for search: every query is
//! answered by scanning every record.

use std::collections::HashMap;

use metaharvest_core::index::{IndexedField, Query, QueryNode, SpatialRelation};
use metaharvest_core::record::{GeoBoundingBox, MetadataRecord};
use metaharvest_core::synth::{KEYWORDS, WORDS};
use rand::seq::IndexedRandom;
use rand::Rng;

const K1: f64 = 1.2;
const B: f64 = 0.75;

fn tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in s.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn values(r: &MetadataRecord, field: IndexedField) -> Vec<String> {
    match field {
        IndexedField::All => std::iter::once(r.title.clone())
            .chain(std::iter::once(r.r#abstract.clone()))
            .chain(r.keywords.iter().cloned())
            .chain(r.authors.iter().cloned())
            .collect(),
        IndexedField::Title => vec![r.title.clone()],
        IndexedField::Abstract => vec![r.r#abstract.clone()],
        IndexedField::Keywords => r.keywords.clone(),
        IndexedField::Author => r.authors.clone(),
        IndexedField::Source => vec![r.source_id.clone()],
        IndexedField::Schema => vec![r.schema.as_str().to_string()],
    }
}

/// One record with every field pre-tokenized, value by value.
struct Doc {
    fields: HashMap<IndexedField, Vec<Vec<String>>>,
    lon: Option<Vec<bool>>,
}

/// Longitudes on a quarter-degree grid, -180 through 180 inclusive.
const LON_STEPS: usize = 1441;

fn lon_index(lon: f64) -> usize {
    ((lon + 180.0) * 4.0).round() as usize
}

/// Grid points covered by a box's longitude range, walking east from west
/// and wrapping at the antimeridian.
fn lon_cells(b: &GeoBoundingBox) -> Vec<bool> {
    let mut cells = vec![false; LON_STEPS];
    let (w, e) = (lon_index(b.west), lon_index(b.east));
    if b.west <= b.east {
        cells[w..=e].iter_mut().for_each(|c| *c = true);
    } else {
        cells[w..].iter_mut().for_each(|c| *c = true);
        cells[..=e].iter_mut().for_each(|c| *c = true);
    }
    cells
}

pub struct Oracle {
    records: Vec<MetadataRecord>,
    docs: Vec<Doc>,
}

impl Oracle {
    /// Live records only; the last version of each identifier wins.
    pub fn new(records: &[MetadataRecord]) -> Self {
        let mut latest: HashMap<&str, &MetadataRecord> = HashMap::new();
        for r in records {
            latest.insert(&r.identifier, r);
        }
        let mut records: Vec<MetadataRecord> = latest.into_values().filter(|r| !r.deleted).cloned().collect();
        records.sort_by(|a, b| a.identifier.cmp(&b.identifier));
        let docs = records
            .iter()
            .map(|r| Doc {
                fields: IndexedField::ALL_FIELDS
                    .into_iter()
                    .map(|f| (f, values(r, f).iter().map(|v| tokens(v)).filter(|t| !t.is_empty()).collect()))
                    .collect(),
                lon: r.bbox.as_ref().map(lon_cells),
            })
            .collect();
        Oracle { records, docs }
    }

    pub fn records(&self) -> &[MetadataRecord] {
        &self.records
    }

    fn tf(doc: &Doc, node: &QueryNode) -> u32 {
        match node {
            QueryNode::Term(f, t) => doc.fields[f].iter().flatten().filter(|x| *x == t).count() as u32,
            QueryNode::Phrase(f, p) if f.is_whole_value() => doc.fields[f].iter().filter(|v| *v == p).count() as u32,
            QueryNode::Phrase(f, p) => doc.fields[f]
                .iter()
                .map(|v| v.windows(p.len()).filter(|w| *w == p.as_slice()).count() as u32)
                .sum(),
            _ => unreachable!("not a leaf"),
        }
    }

    fn eval(doc: &Doc, node: &QueryNode) -> bool {
        match node {
            QueryNode::MatchAll => true,
            QueryNode::Term(..) | QueryNode::Phrase(..) => Self::tf(doc, node) > 0,
            QueryNode::And(c) => c.iter().all(|n| Self::eval(doc, n)),
            QueryNode::Or(c) => c.iter().any(|n| Self::eval(doc, n)),
            QueryNode::Not(n) => !Self::eval(doc, n),
        }
    }

    fn filters(&self, i: usize, q: &Query) -> bool {
        let r = &self.records[i];
        if let Some(sf) = &q.spatial {
            let (Some(b), Some(cells)) = (&r.bbox, &self.docs[i].lon) else { return false };
            let qcells = lon_cells(&sf.bbox);
            let ok = match sf.relation {
                SpatialRelation::Intersects => {
                    b.south.max(sf.bbox.south) <= b.north.min(sf.bbox.north)
                        && cells.iter().zip(&qcells).any(|(a, c)| *a && *c)
                }
                SpatialRelation::Contains => {
                    b.south <= sf.bbox.south
                        && sf.bbox.north <= b.north
                        && qcells.iter().zip(cells).all(|(q, a)| !*q || *a)
                }
                SpatialRelation::Within => {
                    sf.bbox.south <= b.south
                        && b.north <= sf.bbox.north
                        && cells.iter().zip(&qcells).all(|(a, q)| !*a || *q)
                }
            };
            if !ok {
                return false;
            }
        }
        if let Some(tf) = &q.temporal {
            let Some(t) = &r.temporal else { return false };
            let lo = |d: Option<chrono::DateTime<chrono::Utc>>| d.map_or(i64::MIN, |d| d.timestamp());
            let hi = |d: Option<chrono::DateTime<chrono::Utc>>| d.map_or(i64::MAX, |d| d.timestamp());
            if lo(t.start).max(lo(tf.start)) > hi(t.end).min(hi(tf.end)) {
                return false;
            }
        }
        true
    }

    /// Matching identifiers, ascending.
    pub fn matching(&self, q: &Query) -> Vec<String> {
        (0..self.docs.len())
            .filter(|&i| Self::eval(&self.docs[i], &q.root) && self.filters(i, q))
            .map(|i| self.records[i].identifier.clone())
            .collect()
    }

    fn positive_leaves<'a>(node: &'a QueryNode, out: &mut Vec<&'a QueryNode>) {
        match node {
            QueryNode::Not(_) => {}
            QueryNode::And(c) | QueryNode::Or(c) => c.iter().for_each(|n| Self::positive_leaves(n, out)),
            leaf => out.push(leaf),
        }
    }

    fn df(&self, field: IndexedField, token: &str) -> usize {
        self.docs.iter().filter(|d| d.fields[&field].iter().flatten().any(|t| t == token)).count()
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.docs.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn avgdl(&self, field: IndexedField) -> f64 {
        let total: usize = self.docs.iter().map(|d| d.fields[&field].iter().map(Vec::len).sum::<usize>()).sum();
        total as f64 / self.docs.len() as f64
    }

    /// Scores of matching records by identifier.
    pub fn scores(&self, q: &Query) -> HashMap<String, f64> {
        let mut leaves = Vec::new();
        Self::positive_leaves(&q.root, &mut leaves);
        // (leaf, field, idf, avgdl); None field for MatchAll.
        let weights: Vec<(&QueryNode, Option<IndexedField>, f64, f64)> = leaves
            .iter()
            .map(|leaf| match leaf {
                QueryNode::MatchAll => (*leaf, None, 0.0, 0.0),
                QueryNode::Term(f, t) => (*leaf, Some(*f), self.idf(self.df(*f, t)), self.avgdl(*f)),
                QueryNode::Phrase(f, p) => {
                    (*leaf, Some(*f), p.iter().map(|t| self.idf(self.df(*f, t))).sum(), self.avgdl(*f))
                }
                _ => unreachable!(),
            })
            .collect();
        let mut out = HashMap::new();
        for (i, doc) in self.docs.iter().enumerate() {
            if !(Self::eval(doc, &q.root) && self.filters(i, q)) {
                continue;
            }
            let mut score = 0.0;
            for &(leaf, field, idf, avg) in &weights {
                let Some(field) = field else {
                    score += 1.0;
                    continue;
                };
                let tf = Self::tf(doc, leaf) as f64;
                if tf == 0.0 {
                    continue;
                }
                let dl: usize = doc.fields[&field].iter().map(Vec::len).sum();
                score += idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * dl as f64 / avg));
            }
            out.insert(self.records[i].identifier.clone(), score);
        }
        out
    }
}

/// A random query string covering fields, phrases, whole-value keywords,
/// AND / OR / NOT, grouping and `*`. Phrases are drawn from `records` so
/// that some of them match.
pub fn random_query(rng: &mut impl Rng, records: &[MetadataRecord], depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.45) {
        return random_leaf(rng, records);
    }
    let a = random_query(rng, records, depth - 1);
    let b = random_query(rng, records, depth - 1);
    match rng.random_range(0..6) {
        0 => format!("{a} OR {b}"),
        1 => format!("{a} AND {b}"),
        2 => format!("{a} {b}"),
        3 => format!("{a} NOT {b}"),
        4 => format!("({a} OR {b}) {}", random_leaf(rng, records)),
        _ => format!("NOT ({a}) {b}"),
    }
}

fn random_leaf(rng: &mut impl Rng, records: &[MetadataRecord]) -> String {
    let word = *WORDS.choose(rng).unwrap();
    match rng.random_range(0..12) {
        0..=3 => word.to_string(),
        4 => format!("title:{word}"),
        5 => format!("abstract:{word}"),
        6 => format!("keywords:\"{}\"", KEYWORDS.choose(rng).unwrap()),
        7 => format!("keywords:{}", tokens(KEYWORDS.choose(rng).unwrap())[0]),
        8 => {
            let r = records.choose(rng).unwrap();
            let t = tokens(&format!("{} {}", r.title, r.r#abstract));
            let start = rng.random_range(0..t.len().saturating_sub(1).max(1));
            let len = rng.random_range(2..=3).min(t.len() - start);
            let field = ["", "title:", "all:"].choose(rng).unwrap();
            format!("{field}\"{}\"", t[start..start + len].join(" "))
        }
        9 => format!("author:{}", ["smith", "chen", "garcia", "\"novak j\""].choose(rng).unwrap()),
        10 => format!("schema:{}", ["fgdc", "eml", "dif", "iso19115", "oai_dc"].choose(rng).unwrap()),
        _ => "*".to_string(),
    }
}
