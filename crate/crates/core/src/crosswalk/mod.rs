//! Crosswalks from the supported metadata standards into [`MetadataRecord`],
//! and the `oai_dc` export used when serving records.
//!
//! Element mapping per standard (paths relative to the root element):
//!
//! | field     | FGDC CSDGM                                   | EML                                                   |
//! |-----------|----------------------------------------------|-------------------------------------------------------|
//! | id        | (from context)                               | `@packageId`                                          |
//! | title     | `idinfo/citation/citeinfo/title`             | `dataset/title`                                       |
//! | abstract  | `idinfo/descript/abstract`                   | `dataset/abstract`                                    |
//! | keywords  | `idinfo/keywords/theme/themekey`             | `dataset/keywordSet/keyword`                          |
//! | authors   | `idinfo/citation/citeinfo/origin`            | `dataset/creator/individualName` as "surname, given"  |
//! | urls      | `idinfo/citation/citeinfo/onlink`            | `dataset/distribution/online/url`                     |
//! | bbox      | `idinfo/spdom/bounding/{westbc,..}`          | `dataset/coverage/geographicCoverage/boundingCoordinates` |
//! | temporal  | `idinfo/timeperd/timeinfo`                   | `dataset/coverage/temporalCoverage`                   |
//! | datestamp | `metainfo/metd`                              | `dataset/pubDate`                                     |
//!
//! | field     | GCMD DIF                                      | ISO 19115 / 19139                                    |
//! |-----------|-----------------------------------------------|------------------------------------------------------|
//! | id        | `Entry_ID` (or `Entry_ID/Short_Name`)         | `fileIdentifier`                                     |
//! | title     | `Entry_Title`                                 | `identificationInfo/MD_DataIdentification/citation/CI_Citation/title` |
//! | abstract  | `Summary` (or `Summary/Abstract`)             | `identificationInfo/MD_DataIdentification/abstract`  |
//! | keywords  | `Keyword`, `Parameters/*` joined with " > "   | `MD_Keywords/keyword`                                |
//! | authors   | `Data_Set_Citation/Dataset_Creator`           | `citedResponsibleParty//individualName` or `organisationName` |
//! | urls      | `Related_URL/URL`                             | `distributionInfo//CI_OnlineResource/linkage/URL`    |
//! | bbox      | `Spatial_Coverage//{Westernmost_Longitude,..}`| `EX_GeographicBoundingBox`                           |
//! | temporal  | `Temporal_Coverage/{Start_Date,Stop_Date}`    | `EX_TemporalExtent//{beginPosition,endPosition}`     |
//! | datestamp | `Last_DIF_Revision_Date`                      | `dateStamp`                                          |
//!
//! Dublin Core (bare `dc:*` elements or an `oai_dc:dc` root) maps directly:
//! `dc:title`, `dc:description`, `dc:subject`, `dc:creator`; URL-valued
//! `dc:identifier`s become data URLs and the first other one the identifier;
//! `dc:coverage` yields a bbox only in the `box: W,S,E,N` form; `dc:date`
//! is the datestamp.
//!
//! Where the model holds one value and the document has several, the first
//! in document order wins.

mod dc;
mod detect;
mod dif;
mod eml;
mod export;
mod fgdc;
mod iso;
pub mod xml;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::datetime::parse_flexible_date;
use crate::record::{
    canonicalize, qualified_identifier, GeoBoundingBox, MetadataRecord, RecordError, SchemaKind, TemporalExtent,
};

pub use detect::detect_schema;
pub use export::{format_box_coverage, format_time_coverage, oai_dc_element, parse_box_coverage, to_oai_dc, DC_NS, OAI_DC_NS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrosswalkError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("unknown metadata schema (root element {0})")]
    UnknownSchema(String),
    #[error("missing required field: {0}")]
    MissingRequiredField(String),
    #[error("coordinate out of range: {0}")]
    CoordinateOutOfRange(String),
    #[error("invalid date: {0}")]
    InvalidDate(String),
    #[error("record {0} is deleted")]
    DeletedRecord(String),
}

impl CrosswalkError {
    pub fn kind(&self) -> &'static str {
        match self {
            CrosswalkError::MalformedXml(_) => "MalformedXml",
            CrosswalkError::UnknownSchema(_) => "UnknownSchema",
            CrosswalkError::MissingRequiredField(_) => "MissingRequiredField",
            CrosswalkError::CoordinateOutOfRange(_) => "CoordinateOutOfRange",
            CrosswalkError::InvalidDate(_) => "InvalidDate",
            CrosswalkError::DeletedRecord(_) => "DeletedRecord",
        }
    }
}

impl From<RecordError> for CrosswalkError {
    fn from(e: RecordError) -> Self {
        match e {
            RecordError::CoordinateOutOfRange(m) => CrosswalkError::CoordinateOutOfRange(m),
            RecordError::InvalidTemporalExtent(m) => CrosswalkError::InvalidDate(m),
            RecordError::EmptyIdentifier => CrosswalkError::MissingRequiredField("identifier".into()),
            RecordError::MissingTitle(_) => CrosswalkError::MissingRequiredField("title".into()),
        }
    }
}

/// Context a caller knows about a document beyond its bytes.
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub source_id: String,
    /// Provider-local identifier (OAI header identifier, relative path).
    /// Takes precedence over any identifier inside the document.
    pub local_id: Option<String>,
    /// Overrides any datestamp found in the document.
    pub datestamp: Option<DateTime<Utc>>,
    pub sets: Vec<String>,
}

impl ParseOptions {
    pub fn new(source_id: impl Into<String>) -> Self {
        ParseOptions { source_id: source_id.into(), ..Default::default() }
    }
}

/// Fields pulled out of a document before validation.
#[derive(Debug, Default)]
pub(crate) struct Extracted {
    pub local_id: Option<String>,
    pub title: Option<String>,
    pub r#abstract: Option<String>,
    pub keywords: Vec<String>,
    pub authors: Vec<String>,
    pub data_urls: Vec<String>,
    pub bbox: Option<RawBox>,
    pub temporal: Option<(Option<String>, Option<String>)>,
    pub datestamp: Option<String>,
}

/// Bounding coordinates as text, in west, south, east, north order.
#[derive(Debug, Default)]
pub(crate) struct RawBox {
    pub west: Option<String>,
    pub south: Option<String>,
    pub east: Option<String>,
    pub north: Option<String>,
}

impl RawBox {
    fn is_empty(&self) -> bool {
        self.west.is_none() && self.south.is_none() && self.east.is_none() && self.north.is_none()
    }

    fn resolve(&self) -> Result<Option<GeoBoundingBox>, CrosswalkError> {
        if self.is_empty() {
            return Ok(None);
        }
        let coord = |name: &str, v: &Option<String>| -> Result<f64, CrosswalkError> {
            let raw = v.as_deref().ok_or_else(|| CrosswalkError::MissingRequiredField(format!("bbox {name}")))?;
            let parsed: f64 = raw
                .trim()
                .parse()
                .map_err(|_| CrosswalkError::CoordinateOutOfRange(format!("{name} {raw:?} is not a number")))?;
            if !parsed.is_finite() {
                return Err(CrosswalkError::CoordinateOutOfRange(format!("{name} {raw:?}")));
            }
            Ok(parsed)
        };
        let bbox = GeoBoundingBox::new(
            coord("west", &self.west)?,
            coord("south", &self.south)?,
            coord("east", &self.east)?,
            coord("north", &self.north)?,
        )?;
        Ok(Some(bbox))
    }
}

/// Words standing for an open or unknown temporal bound.
fn is_open_date(s: &str) -> bool {
    matches!(
        s.trim().to_ascii_lowercase().as_str(),
        "" | "present" | "unknown" | "now" | "unpublished material" | "ongoing"
    )
}

fn resolve_date(field: &str, raw: &str) -> Result<Option<DateTime<Utc>>, CrosswalkError> {
    if is_open_date(raw) {
        return Ok(None);
    }
    parse_flexible_date(raw)
        .map(Some)
        .ok_or_else(|| CrosswalkError::InvalidDate(format!("{field} {raw:?}")))
}

impl Extracted {
    fn into_record(
        self,
        schema: SchemaKind,
        document: &[u8],
        opts: &ParseOptions,
    ) -> Result<MetadataRecord, CrosswalkError> {
        let local_id = opts
            .local_id
            .clone()
            .or(self.local_id)
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| CrosswalkError::MissingRequiredField("identifier".into()))?;
        let title = self
            .title
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| CrosswalkError::MissingRequiredField("title".into()))?;

        let bbox = self.bbox.as_ref().map(RawBox::resolve).transpose()?.flatten();
        let temporal = match self.temporal {
            Some((start, end)) => {
                let start = start.map(|s| resolve_date("start", &s)).transpose()?.flatten();
                let end = end.map(|s| resolve_date("end", &s)).transpose()?.flatten();
                if start.is_none() && end.is_none() {
                    None
                } else {
                    Some(TemporalExtent::new(start, end)?)
                }
            }
            None => None,
        };
        let datestamp = match opts.datestamp {
            Some(d) => d,
            None => match self.datestamp {
                Some(raw) if !is_open_date(&raw) => parse_flexible_date(&raw).unwrap_or(DateTime::UNIX_EPOCH),
                _ => DateTime::UNIX_EPOCH,
            },
        };

        let mut record = MetadataRecord::new(
            qualified_identifier(&opts.source_id, local_id.trim()),
            opts.source_id.clone(),
            schema,
            title,
            datestamp,
        );
        record.r#abstract = self.r#abstract.unwrap_or_default();
        record.keywords = self.keywords;
        record.authors = self.authors;
        record.data_urls = self.data_urls;
        record.bbox = bbox;
        record.temporal = temporal;
        record.sets = opts.sets.clone();
        record.raw_document = Some(document.to_vec());
        Ok(canonicalize(record))
    }
}

/// Parses `document` as `schema`, qualifying its identifier with `source_id`.
pub fn parse(schema: SchemaKind, document: &[u8], source_id: &str) -> Result<MetadataRecord, CrosswalkError> {
    parse_with(schema, document, &ParseOptions::new(source_id))
}

pub fn parse_with(schema: SchemaKind, document: &[u8], opts: &ParseOptions) -> Result<MetadataRecord, CrosswalkError> {
    let text = xml::decode(document)?;
    let doc = xml::parse_document(&text)?;
    let root = doc.root_element();
    let extracted = match schema {
        SchemaKind::Fgdc => fgdc::extract(root),
        SchemaKind::Eml => eml::extract(root),
        SchemaKind::Dif => dif::extract(root),
        SchemaKind::DublinCore | SchemaKind::OaiDc => dc::extract(root),
        SchemaKind::Iso19115 => iso::extract(root),
    };
    extracted.into_record(schema, document, opts)
}

/// Detects the standard and parses in one step.
pub fn crosswalk(document: &[u8], opts: &ParseOptions) -> Result<MetadataRecord, CrosswalkError> {
    let schema = detect_schema(document)?;
    parse_with(schema, document, opts)
}
