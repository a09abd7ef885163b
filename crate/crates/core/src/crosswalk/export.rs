use chrono::{DateTime, Utc};

use super::xml::escape;
use super::CrosswalkError;
use crate::datetime::{format_date_or_datestamp, format_datestamp};
use crate::record::{GeoBoundingBox, MetadataRecord, TemporalExtent};

pub const OAI_DC_NS: &str = "http://www.openarchives.org/OAI/2.0/oai_dc/";
pub const DC_NS: &str = "http://purl.org/dc/elements/1.1/";
const OAI_DC_XSD: &str = "http://www.openarchives.org/OAI/2.0/oai_dc.xsd";
const XSI_NS: &str = "http://www.w3.org/2001/XMLSchema-instance";

/// `box: W,S,E,N`, the only `dc:coverage` form read back as a bbox.
pub fn format_box_coverage(b: &GeoBoundingBox) -> String {
    format!("box: {},{},{},{}", b.west, b.south, b.east, b.north)
}

/// `time: START/END` with `..` for an open bound.
pub fn format_time_coverage(t: &TemporalExtent) -> String {
    let part = |d: &Option<DateTime<Utc>>| d.as_ref().map(format_date_or_datestamp).unwrap_or_else(|| "..".into());
    format!("time: {}/{}", part(&t.start), part(&t.end))
}

/// Reads the `box: W,S,E,N` form. Range checking is left to the caller.
pub fn parse_box_coverage(s: &str) -> Option<[f64; 4]> {
    let rest = s.trim().strip_prefix("box:")?;
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return None;
    }
    let mut out = [0.0; 4];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p.parse().ok().filter(|v: &f64| v.is_finite())?;
    }
    Some(out)
}

/// The `oai_dc:dc` element for a record, without an XML declaration.
pub fn oai_dc_element(record: &MetadataRecord) -> Result<String, CrosswalkError> {
    if record.deleted {
        return Err(CrosswalkError::DeletedRecord(record.identifier.clone()));
    }
    let mut out = String::with_capacity(512);
    out.push_str(&format!(
        "<oai_dc:dc xmlns:oai_dc=\"{OAI_DC_NS}\" xmlns:dc=\"{DC_NS}\" xmlns:xsi=\"{XSI_NS}\" \
         xsi:schemaLocation=\"{OAI_DC_NS} {OAI_DC_XSD}\">"
    ));
    let mut element = |name: &str, value: &str| {
        out.push_str(&format!("<dc:{name}>{}</dc:{name}>", escape(value)));
    };
    element("title", &record.title);
    for a in &record.authors {
        element("creator", a);
    }
    for k in &record.keywords {
        element("subject", k);
    }
    if !record.r#abstract.is_empty() {
        element("description", &record.r#abstract);
    }
    element("date", &format_datestamp(&record.datestamp));
    for u in &record.data_urls {
        element("identifier", u);
    }
    if let Some(b) = &record.bbox {
        element("coverage", &format_box_coverage(b));
    }
    if let Some(t) = &record.temporal {
        element("coverage", &format_time_coverage(t));
    }
    out.push_str("</oai_dc:dc>");
    Ok(out)
}

/// Standalone `oai_dc` document for a live record.
pub fn to_oai_dc(record: &MetadataRecord) -> Result<Vec<u8>, CrosswalkError> {
    let mut doc = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    doc.push_str(&oai_dc_element(record)?);
    doc.push('\n');
    Ok(doc.into_bytes())
}
