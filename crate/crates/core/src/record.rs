//! The unified metadata record every supported standard crosswalks into.
//!
//! A [`MetadataRecord`] is the unit of harvest, index and search. Its JSON
//! form (field names below) is the line format of the record store; its
//! fingerprint drives change detection during incremental harvests.

use std::collections::HashSet;
use std::fmt;

use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::datetime::{self, datestamp_serde, opt_date_serde};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("coordinate out of range: {0}")]
    CoordinateOutOfRange(String),
    #[error("invalid temporal extent: {0}")]
    InvalidTemporalExtent(String),
    #[error("record identifier is empty")]
    EmptyIdentifier,
    #[error("record {0} is not deleted but has an empty title")]
    MissingTitle(String),
}

/// Metadata standard a record was crosswalked from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemaKind {
    #[serde(rename = "FGDC")]
    Fgdc,
    #[serde(rename = "EML")]
    Eml,
    #[serde(rename = "DIF")]
    Dif,
    DublinCore,
    #[serde(rename = "ISO19115")]
    Iso19115,
    OaiDc,
}

impl SchemaKind {
    pub const ALL: [SchemaKind; 6] = [
        SchemaKind::Fgdc,
        SchemaKind::Eml,
        SchemaKind::Dif,
        SchemaKind::DublinCore,
        SchemaKind::Iso19115,
        SchemaKind::OaiDc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemaKind::Fgdc => "FGDC",
            SchemaKind::Eml => "EML",
            SchemaKind::Dif => "DIF",
            SchemaKind::DublinCore => "DublinCore",
            SchemaKind::Iso19115 => "ISO19115",
            SchemaKind::OaiDc => "OaiDc",
        }
    }

    pub fn parse(s: &str) -> Option<SchemaKind> {
        SchemaKind::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for SchemaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A longitude interval that does not cross the antimeridian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LonSpan {
    pub min: f64,
    pub max: f64,
}

/// Rectangular extent in degrees. `west > east` denotes a box crossing the
/// antimeridian, covering `[west, 180] ∪ [-180, east]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBoundingBox {
    pub west: f64,
    pub south: f64,
    pub east: f64,
    pub north: f64,
}

impl GeoBoundingBox {
    pub fn new(west: f64, south: f64, east: f64, north: f64) -> Result<Self, RecordError> {
        let bbox = GeoBoundingBox { west, south, east, north };
        bbox.validate()?;
        Ok(bbox)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        for (name, v) in [("west", self.west), ("east", self.east)] {
            if !(-180.0..=180.0).contains(&v) {
                return Err(RecordError::CoordinateOutOfRange(format!("{name} longitude {v}")));
            }
        }
        for (name, v) in [("south", self.south), ("north", self.north)] {
            if !(-90.0..=90.0).contains(&v) {
                return Err(RecordError::CoordinateOutOfRange(format!("{name} latitude {v}")));
            }
        }
        if self.south > self.north {
            return Err(RecordError::CoordinateOutOfRange(format!(
                "south {} greater than north {}",
                self.south, self.north
            )));
        }
        Ok(())
    }

    pub fn crosses_antimeridian(&self) -> bool {
        self.west > self.east
    }

    /// Splits the longitude range into at most two ordinary spans.
    pub fn lon_spans(&self) -> impl Iterator<Item = LonSpan> {
        let spans = if self.crosses_antimeridian() {
            [
                Some(LonSpan { min: self.west, max: 180.0 }),
                Some(LonSpan { min: -180.0, max: self.east }),
            ]
        } else {
            [Some(LonSpan { min: self.west, max: self.east }), None]
        };
        spans.into_iter().flatten()
    }
}

/// Time coverage; an absent bound is open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalExtent {
    #[serde(with = "opt_date_serde", default)]
    pub start: Option<DateTime<Utc>>,
    #[serde(with = "opt_date_serde", default)]
    pub end: Option<DateTime<Utc>>,
}

impl TemporalExtent {
    pub fn new(start: Option<DateTime<Utc>>, end: Option<DateTime<Utc>>) -> Result<Self, RecordError> {
        let t = TemporalExtent { start, end };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        match (self.start, self.end) {
            (None, None) => Err(RecordError::InvalidTemporalExtent("both bounds absent".into())),
            (Some(s), Some(e)) if s > e => Err(RecordError::InvalidTemporalExtent(format!(
                "start {} after end {}",
                datetime::format_datestamp(&s),
                datetime::format_datestamp(&e)
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    /// `{source_id}:{provider-local identifier}`.
    pub identifier: String,
    pub source_id: String,
    pub schema: SchemaKind,
    pub title: String,
    #[serde(default)]
    pub r#abstract: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub data_urls: Vec<String>,
    #[serde(default)]
    pub bbox: Option<GeoBoundingBox>,
    #[serde(default)]
    pub temporal: Option<TemporalExtent>,
    /// Provider's last-modified instant.
    #[serde(with = "datestamp_serde")]
    pub datestamp: DateTime<Utc>,
    #[serde(default)]
    pub deleted: bool,
    #[serde(default)]
    pub sets: Vec<String>,
    /// Verbatim harvested document, base64 in JSON.
    #[serde(default, with = "raw_serde", skip_serializing_if = "Option::is_none")]
    pub raw_document: Option<Vec<u8>>,
}

mod raw_serde {
    use super::*;
    use serde::{de::Error, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bytes) => s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(bytes)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(s) => base64::engine::general_purpose::STANDARD
                .decode(s)
                .map(Some)
                .map_err(D::Error::custom),
        }
    }
}

/// Builds the store identifier for a provider-local identifier.
pub fn qualified_identifier(source_id: &str, local_id: &str) -> String {
    format!("{source_id}:{local_id}")
}

impl MetadataRecord {
    /// Minimal live record; callers fill in the remaining fields.
    pub fn new(
        identifier: impl Into<String>,
        source_id: impl Into<String>,
        schema: SchemaKind,
        title: impl Into<String>,
        datestamp: DateTime<Utc>,
    ) -> Self {
        MetadataRecord {
            identifier: identifier.into(),
            source_id: source_id.into(),
            schema,
            title: title.into(),
            r#abstract: String::new(),
            keywords: Vec::new(),
            authors: Vec::new(),
            data_urls: Vec::new(),
            bbox: None,
            temporal: None,
            datestamp,
            deleted: false,
            sets: Vec::new(),
            raw_document: None,
        }
    }

    /// Header-only record standing for a deletion.
    pub fn tombstone(
        identifier: impl Into<String>,
        source_id: impl Into<String>,
        schema: SchemaKind,
        datestamp: DateTime<Utc>,
        sets: Vec<String>,
    ) -> Self {
        let mut r = MetadataRecord::new(identifier, source_id, schema, "", datestamp);
        r.deleted = true;
        r.sets = sets;
        r
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.identifier.is_empty() {
            return Err(RecordError::EmptyIdentifier);
        }
        if !self.deleted && self.title.trim().is_empty() {
            return Err(RecordError::MissingTitle(self.identifier.clone()));
        }
        if let Some(b) = &self.bbox {
            b.validate()?;
        }
        if let Some(t) = &self.temporal {
            t.validate()?;
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalizes a record: whitespace runs in title and abstract collapse to one
/// space; keywords are trimmed and deduplicated case-insensitively (first
/// occurrence wins); authors, URLs and set specs are trimmed with empties
/// dropped; datestamps lose sub-second precision. Idempotent.
pub fn canonicalize(mut record: MetadataRecord) -> MetadataRecord {
    record.title = collapse_whitespace(&record.title);
    record.r#abstract = collapse_whitespace(&record.r#abstract);

    let mut seen = HashSet::new();
    record.keywords = record
        .keywords
        .iter()
        .map(|k| k.trim())
        .filter(|k| !k.is_empty() && seen.insert(k.to_lowercase()))
        .map(str::to_owned)
        .collect();

    let trim_all = |v: &[String]| -> Vec<String> {
        v.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).map(str::to_owned).collect()
    };
    record.authors = trim_all(&record.authors);
    record.data_urls = trim_all(&record.data_urls);
    let mut sets = trim_all(&record.sets);
    sets.sort();
    sets.dedup();
    record.sets = sets;

    record.datestamp = datetime::truncate_to_seconds(record.datestamp);
    if let Some(t) = record.temporal.as_mut() {
        t.start = t.start.map(datetime::truncate_to_seconds);
        t.end = t.end.map(datetime::truncate_to_seconds);
    }
    record
}

/// SHA-256 digest of a record's canonical binary layout.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 64 || !s.is_ascii() {
            return None;
        }
        let mut out = [0u8; 32];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            out[i] = u8::from_str_radix(std::str::from_utf8(chunk).ok()?, 16).ok()?;
        }
        Some(Fingerprint(out))
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", self.to_hex())
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Fingerprint::from_hex(&s).ok_or_else(|| serde::de::Error::custom("invalid fingerprint"))
    }
}

const FINGERPRINT_MAGIC: &[u8] = b"MHREC\x01";

/// Canonical binary layout hashed by [`fingerprint`]:
///
/// ```text
/// "MHREC" 0x01
/// str identifier, str source_id, str schema, str title, str abstract
/// list keywords, list authors, list data_urls
/// 0x00 | 0x01 f64 west f64 south f64 east f64 north
/// 0x00 | 0x01 opt_ts start opt_ts end
/// u8 deleted
/// list sets
///
/// str    = u32 BE byte length, UTF-8 bytes
/// list   = u32 BE count, str*
/// f64    = IEEE-754 bits, BE (-0.0 written as 0.0)
/// opt_ts = 0x00 | 0x01 i64 BE unix seconds
/// ```
///
/// `datestamp` and `raw_document` are excluded.
pub fn canonical_bytes(record: &MetadataRecord) -> Vec<u8> {
    fn put_str(out: &mut Vec<u8>, s: &str) {
        out.extend_from_slice(&(s.len() as u32).to_be_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    fn put_list(out: &mut Vec<u8>, items: &[String]) {
        out.extend_from_slice(&(items.len() as u32).to_be_bytes());
        for s in items {
            put_str(out, s);
        }
    }
    fn put_f64(out: &mut Vec<u8>, v: f64) {
        let v = if v == 0.0 { 0.0 } else { v };
        out.extend_from_slice(&v.to_bits().to_be_bytes());
    }
    fn put_ts(out: &mut Vec<u8>, t: Option<DateTime<Utc>>) {
        match t {
            Some(t) => {
                out.push(1);
                out.extend_from_slice(&t.timestamp().to_be_bytes());
            }
            None => out.push(0),
        }
    }

    let mut out = Vec::with_capacity(256);
    out.extend_from_slice(FINGERPRINT_MAGIC);
    put_str(&mut out, &record.identifier);
    put_str(&mut out, &record.source_id);
    put_str(&mut out, record.schema.as_str());
    put_str(&mut out, &record.title);
    put_str(&mut out, &record.r#abstract);
    put_list(&mut out, &record.keywords);
    put_list(&mut out, &record.authors);
    put_list(&mut out, &record.data_urls);
    match &record.bbox {
        Some(b) => {
            out.push(1);
            for v in [b.west, b.south, b.east, b.north] {
                put_f64(&mut out, v);
            }
        }
        None => out.push(0),
    }
    match &record.temporal {
        Some(t) => {
            out.push(1);
            put_ts(&mut out, t.start);
            put_ts(&mut out, t.end);
        }
        None => out.push(0),
    }
    out.push(record.deleted as u8);
    put_list(&mut out, &record.sets);
    out
}

pub fn fingerprint(record: &MetadataRecord) -> Fingerprint {
    Fingerprint(Sha256::digest(canonical_bytes(record)).into())
}
