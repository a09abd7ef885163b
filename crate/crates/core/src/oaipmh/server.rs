//! Repository (data provider) side.
//!
//! Metadata formats:
//!
//! | prefix     | served for                               | content                    |
//! |------------|------------------------------------------|----------------------------|
//! | `oai_dc`   | every record                             | regenerated from the record |
//! | `fgdc`     | FGDC records holding their source XML    | source document root        |
//! | `eml`      | EML records holding their source XML     | source document root        |
//! | `dif`      | DIF records holding their source XML     | source document root        |
//! | `iso19115` | ISO 19115 records holding their source XML | source document root      |
//!
//! Lists are ordered by identifier. Each record belongs to the set named by
//! its `source_id` plus its own `sets`; a set `a` also contains `a:b`.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};

use super::token::{self, TokenError, TokenState};
use super::{
    parse_request, Header, IdentifyInfo, MetadataFormat, OaiError, OaiErrorCode, OaiPayload, OaiRecord, OaiRequest,
    OaiResponse, ResumptionInfo, SetInfo, Verb,
};
use crate::crosswalk::{oai_dc_element, xml, OAI_DC_NS};
use crate::datetime::{parse_oai_datestamp, truncate_to_seconds, Granularity};
use crate::record::{MetadataRecord, SchemaKind};
use crate::store::{StoreView, StoredRecord};

pub const DEFAULT_PAGE_SIZE: usize = 100;

#[derive(Debug, Clone)]
pub struct RepositoryConfig {
    pub repository_name: String,
    pub base_url: String,
    pub admin_emails: Vec<String>,
    pub page_size: usize,
    pub token_ttl: Duration,
    pub token_secret: Vec<u8>,
    pub sets_enabled: bool,
    /// Display names for set specs; unnamed sets use the spec.
    pub set_names: BTreeMap<String, String>,
}

impl RepositoryConfig {
    pub fn new(repository_name: impl Into<String>, base_url: impl Into<String>) -> Self {
        RepositoryConfig {
            repository_name: repository_name.into(),
            base_url: base_url.into(),
            admin_emails: vec!["admin@localhost".into()],
            page_size: DEFAULT_PAGE_SIZE,
            token_ttl: Duration::hours(24),
            token_secret: b"metaharvest".to_vec(),
            sets_enabled: true,
            set_names: BTreeMap::new(),
        }
    }
}

struct Format {
    prefix: &'static str,
    schema_url: &'static str,
    namespace: &'static str,
    native: Option<SchemaKind>,
}

const FORMATS: [Format; 5] = [
    Format {
        prefix: "oai_dc",
        schema_url: "http://www.openarchives.org/OAI/2.0/oai_dc.xsd",
        namespace: OAI_DC_NS,
        native: None,
    },
    Format {
        prefix: "fgdc",
        schema_url: "http://www.fgdc.gov/metadata/fgdc-std-001-1998.xsd",
        namespace: "http://www.fgdc.gov/metadata/csdgm",
        native: Some(SchemaKind::Fgdc),
    },
    Format {
        prefix: "eml",
        schema_url: "https://eml.ecoinformatics.org/eml-2.2.0/eml.xsd",
        namespace: "https://eml.ecoinformatics.org/eml-2.2.0",
        native: Some(SchemaKind::Eml),
    },
    Format {
        prefix: "dif",
        schema_url: "http://gcmd.gsfc.nasa.gov/Aboutus/xml/dif/dif_v9.9.3.xsd",
        namespace: "http://gcmd.gsfc.nasa.gov/Aboutus/xml/dif/",
        native: Some(SchemaKind::Dif),
    },
    Format {
        prefix: "iso19115",
        schema_url: "http://www.isotc211.org/2005/gmd/gmd.xsd",
        namespace: "http://www.isotc211.org/2005/gmd",
        native: Some(SchemaKind::Iso19115),
    },
];

fn format(prefix: &str) -> Option<&'static Format> {
    FORMATS.iter().find(|f| f.prefix == prefix)
}

/// The metadata prefix under which records of `schema` are served natively.
pub fn native_prefix(schema: SchemaKind) -> Option<&'static str> {
    FORMATS.iter().find(|f| f.native == Some(schema)).map(|f| f.prefix)
}

/// Schema of records served under `prefix`, for tombstones whose format is
/// only known from the prefix they were harvested with.
pub fn prefix_schema(prefix: &str) -> Option<SchemaKind> {
    match prefix {
        "oai_dc" => Some(SchemaKind::OaiDc),
        p => format(p).and_then(|f| f.native),
    }
}

fn describe(f: &Format) -> MetadataFormat {
    MetadataFormat { prefix: f.prefix.into(), schema: f.schema_url.into(), namespace: f.namespace.into() }
}

/// Root element of the stored source document, without declaration.
fn native_xml(record: &MetadataRecord) -> Option<String> {
    let raw = record.raw_document.as_deref()?;
    let text = xml::decode(raw).ok()?;
    let doc = xml::parse_document(&text).ok()?;
    Some(xml::standalone_fragment(&text, doc.root_element()))
}

fn available(record: &MetadataRecord, f: &Format) -> bool {
    match f.native {
        None => true,
        Some(schema) => record.schema == schema && (record.deleted || record.raw_document.is_some()),
    }
}

fn disseminate(record: &MetadataRecord, f: &Format) -> Option<String> {
    match f.native {
        None => oai_dc_element(record).ok(),
        Some(schema) if record.schema == schema => native_xml(record),
        Some(_) => None,
    }
}

fn record_sets(record: &MetadataRecord, config: &RepositoryConfig) -> Vec<String> {
    if !config.sets_enabled {
        return Vec::new();
    }
    let mut sets: BTreeSet<String> = record.sets.iter().cloned().collect();
    sets.insert(record.source_id.clone());
    sets.into_iter().collect()
}

fn in_set(sets: &[String], spec: &str) -> bool {
    sets.iter().any(|s| s == spec || s.strip_prefix(spec).is_some_and(|rest| rest.starts_with(':')))
}

fn header(record: &MetadataRecord, config: &RepositoryConfig) -> Header {
    Header {
        identifier: record.identifier.clone(),
        datestamp: record.datestamp,
        sets: record_sets(record, config),
        deleted: record.deleted,
    }
}

/// Selective-harvest window and set, resolved from request arguments.
struct Selection<'a> {
    format: &'static Format,
    from: Option<DateTime<Utc>>,
    until: Option<DateTime<Utc>>,
    set: Option<&'a str>,
    snapshot: u64,
}

impl Selection<'_> {
    fn matches(&self, entry: &StoredRecord, config: &RepositoryConfig) -> bool {
        let r = &entry.record;
        entry.seq <= self.snapshot
            && available(r, self.format)
            && self.from.is_none_or(|f| r.datestamp >= f)
            && self.until.is_none_or(|u| r.datestamp <= u)
            && self.set.is_none_or(|s| in_set(&record_sets(r, config), s))
    }
}

fn bad(code: OaiErrorCode, message: impl Into<String>) -> OaiError {
    OaiError::new(code, message)
}

/// Parses `from`/`until`; a day-granularity `until` covers its whole day.
fn parse_window(from: Option<&str>, until: Option<&str>) -> Result<(Option<DateTime<Utc>>, Option<DateTime<Utc>>), OaiError> {
    let parse = |name: &str, v: &str| {
        parse_oai_datestamp(v).ok_or_else(|| bad(OaiErrorCode::BadArgument, format!("{name} is not a valid datestamp: {v:?}")))
    };
    let from = from.map(|v| parse("from", v)).transpose()?;
    let until = until.map(|v| parse("until", v)).transpose()?;
    if let (Some((_, gf)), Some((_, gu))) = (&from, &until) {
        if gf != gu {
            return Err(bad(OaiErrorCode::BadArgument, "from and until have different granularities"));
        }
    }
    let from = from.map(|(d, _)| d);
    let until = until.map(|(d, g)| match g {
        Granularity::Day => d + Duration::days(1) - Duration::seconds(1),
        Granularity::Seconds => d,
    });
    if let (Some(f), Some(u)) = (from, until) {
        if f > u {
            return Err(bad(OaiErrorCode::BadArgument, "from is later than until"));
        }
    }
    Ok((from, until))
}

/// Answers one OAI-PMH request against a store view.
pub fn handle_request<K: AsRef<str>, V: AsRef<str>>(
    pairs: &[(K, V)],
    view: &StoreView,
    config: &RepositoryConfig,
    now: DateTime<Utc>,
) -> OaiResponse {
    let response_date = truncate_to_seconds(now);
    let base_url = config.base_url.clone();
    let request = match parse_request(pairs) {
        Ok(r) => r,
        Err(e) => {
            return OaiResponse { response_date, base_url, request: None, payload: OaiPayload::Errors(vec![e]) };
        }
    };
    let payload = dispatch(&request, view, config, response_date).unwrap_or_else(|e| OaiPayload::Errors(vec![e]));
    OaiResponse { response_date, base_url, request: Some(request), payload }
}

fn dispatch(req: &OaiRequest, view: &StoreView, config: &RepositoryConfig, now: DateTime<Utc>) -> Result<OaiPayload, OaiError> {
    match req.verb {
        Verb::Identify => Ok(OaiPayload::Identify(IdentifyInfo {
            repository_name: config.repository_name.clone(),
            base_url: config.base_url.clone(),
            earliest_datestamp: view.earliest_datestamp().unwrap_or(DateTime::UNIX_EPOCH),
            admin_emails: config.admin_emails.clone(),
        })),
        Verb::ListMetadataFormats => list_metadata_formats(req, view),
        Verb::ListSets => list_sets(req, view, config),
        Verb::GetRecord => get_record(req, view, config),
        Verb::ListIdentifiers | Verb::ListRecords => list(req, view, config, now),
    }
}

fn list_metadata_formats(req: &OaiRequest, view: &StoreView) -> Result<OaiPayload, OaiError> {
    let Some(id) = req.arg("identifier") else {
        return Ok(OaiPayload::ListMetadataFormats(FORMATS.iter().map(describe).collect()));
    };
    let entry = view.get(id).ok_or_else(|| bad(OaiErrorCode::IdDoesNotExist, format!("no record {id:?}")))?;
    let formats: Vec<MetadataFormat> = if entry.record.deleted {
        Vec::new()
    } else {
        FORMATS.iter().filter(|f| available(&entry.record, f)).map(describe).collect()
    };
    if formats.is_empty() {
        return Err(bad(OaiErrorCode::NoMetadataFormats, format!("no formats available for {id:?}")));
    }
    Ok(OaiPayload::ListMetadataFormats(formats))
}

fn list_sets(req: &OaiRequest, view: &StoreView, config: &RepositoryConfig) -> Result<OaiPayload, OaiError> {
    if !config.sets_enabled {
        return Err(bad(OaiErrorCode::NoSetHierarchy, "this repository does not support sets"));
    }
    if req.arg("resumptionToken").is_some() {
        return Err(bad(OaiErrorCode::BadResumptionToken, "set lists are never split"));
    }
    let mut specs: BTreeSet<String> = config.set_names.keys().cloned().collect();
    for entry in view.iter() {
        specs.extend(record_sets(&entry.record, config));
    }
    if specs.is_empty() {
        return Err(bad(OaiErrorCode::NoSetHierarchy, "no sets defined"));
    }
    let sets = specs
        .into_iter()
        .map(|spec| SetInfo { name: config.set_names.get(&spec).cloned().unwrap_or_else(|| spec.clone()), spec })
        .collect();
    Ok(OaiPayload::ListSets(sets))
}

fn get_record(req: &OaiRequest, view: &StoreView, config: &RepositoryConfig) -> Result<OaiPayload, OaiError> {
    let id = req.arg("identifier").unwrap_or_default();
    let prefix = req.arg("metadataPrefix").unwrap_or_default();
    let entry = view.get(id).ok_or_else(|| bad(OaiErrorCode::IdDoesNotExist, format!("no record {id:?}")))?;
    let cannot = || bad(OaiErrorCode::CannotDisseminateFormat, format!("{id:?} is not available as {prefix:?}"));
    let f = format(prefix).ok_or_else(cannot)?;
    if !available(&entry.record, f) {
        return Err(cannot());
    }
    let metadata = if entry.record.deleted {
        None
    } else {
        Some(disseminate(&entry.record, f).ok_or_else(cannot)?)
    };
    Ok(OaiPayload::GetRecord(OaiRecord { header: header(&entry.record, config), metadata }))
}

fn list(req: &OaiRequest, view: &StoreView, config: &RepositoryConfig, now: DateTime<Utc>) -> Result<OaiPayload, OaiError> {
    let state = match req.arg("resumptionToken") {
        Some(t) => {
            let s = token::decode(t, &config.token_secret, req.verb, now).map_err(|e| {
                let reason = match e {
                    TokenError::Malformed => "malformed",
                    TokenError::BadSignature => "signature mismatch",
                    TokenError::Expired => "expired",
                    TokenError::WrongVerb => "issued for another verb",
                };
                bad(OaiErrorCode::BadResumptionToken, format!("resumption token {reason}"))
            })?;
            if s.snapshot > view.seq() {
                return Err(bad(OaiErrorCode::BadResumptionToken, "resumption token refers to an unknown store state"));
            }
            Some(s)
        }
        None => None,
    };

    let (prefix, from_arg, until_arg, set_arg) = match &state {
        Some(s) => (s.prefix.as_str(), s.from.as_deref(), s.until.as_deref(), s.set.as_deref()),
        None => (
            req.arg("metadataPrefix").unwrap_or_default(),
            req.arg("from"),
            req.arg("until"),
            req.arg("set"),
        ),
    };
    let (from, until) = parse_window(from_arg, until_arg)?;
    let f = format(prefix)
        .ok_or_else(|| bad(OaiErrorCode::CannotDisseminateFormat, format!("unsupported metadataPrefix {prefix:?}")))?;
    if set_arg.is_some() && !config.sets_enabled {
        return Err(bad(OaiErrorCode::NoSetHierarchy, "this repository does not support sets"));
    }
    let sel = Selection {
        format: f,
        from,
        until,
        set: set_arg,
        snapshot: state.as_ref().map_or(view.seq(), |s| s.snapshot),
    };

    let (after, cursor, size) = match &state {
        Some(s) => (s.after.as_str(), s.cursor, s.size),
        None => ("", 0, view.iter().filter(|e| sel.matches(e, config)).count()),
    };
    let mut page = Vec::new();
    let mut more = false;
    let candidates = if state.is_some() { Box::new(view.iter_after(after)) as Box<dyn Iterator<Item = _>> } else { Box::new(view.iter()) };
    for entry in candidates.filter(|e| sel.matches(e, config)) {
        if page.len() == config.page_size {
            more = true;
            break;
        }
        page.push(entry);
    }
    if page.is_empty() {
        return Err(bad(OaiErrorCode::NoRecordsMatch, "no records match the request"));
    }

    let resumption = if more {
        let expires = now + config.token_ttl;
        let next = TokenState {
            verb: req.verb.as_str().into(),
            prefix: prefix.into(),
            from: from_arg.map(Into::into),
            until: until_arg.map(Into::into),
            set: set_arg.map(Into::into),
            after: page.last().expect("page is non-empty").record.identifier.clone(),
            cursor: cursor + page.len(),
            snapshot: sel.snapshot,
            size,
            expires: expires.timestamp(),
        };
        Some(ResumptionInfo {
            token: token::encode(&next, &config.token_secret),
            complete_list_size: size,
            cursor,
            expiration: Some(expires),
        })
    } else if state.is_some() {
        Some(ResumptionInfo { token: String::new(), complete_list_size: size, cursor, expiration: None })
    } else {
        None
    };

    Ok(match req.verb {
        Verb::ListIdentifiers => {
            OaiPayload::ListIdentifiers(page.iter().map(|e| header(&e.record, config)).collect(), resumption)
        }
        _ => {
            let records = page
                .iter()
                .map(|e| OaiRecord {
                    header: header(&e.record, config),
                    metadata: if e.record.deleted { None } else { disseminate(&e.record, f) },
                })
                .collect();
            OaiPayload::ListRecords(records, resumption)
        }
    })
}
