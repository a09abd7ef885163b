//! OAI-PMH 2.0: request validation, a repository server over a
//! [`StoreView`](crate::store::StoreView), response serialization and a
//! harvesting client.

pub mod client;
mod serialize;
pub mod server;
pub mod token;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use client::{HarvestError, HarvestedRecord, HttpTransport, ListRecordsRequest, OaiClient, RetryPolicy, Transport};
pub use serialize::serialize_response;
pub use server::{handle_request, RepositoryConfig};

pub const OAI_PMH_NS: &str = "http://www.openarchives.org/OAI/2.0/";
pub const OAI_PMH_XSD: &str = "http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd";
pub const GRANULARITY: &str = "YYYY-MM-DDThh:mm:ssZ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verb {
    Identify,
    ListMetadataFormats,
    ListSets,
    ListIdentifiers,
    ListRecords,
    GetRecord,
}

impl Verb {
    pub const ALL: [Verb; 6] = [
        Verb::Identify,
        Verb::ListMetadataFormats,
        Verb::ListSets,
        Verb::ListIdentifiers,
        Verb::ListRecords,
        Verb::GetRecord,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Identify => "Identify",
            Verb::ListMetadataFormats => "ListMetadataFormats",
            Verb::ListSets => "ListSets",
            Verb::ListIdentifiers => "ListIdentifiers",
            Verb::ListRecords => "ListRecords",
            Verb::GetRecord => "GetRecord",
        }
    }

    pub fn parse(s: &str) -> Option<Verb> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }

    /// (required, optional, exclusive) arguments.
    fn arguments(self) -> (&'static [&'static str], &'static [&'static str], Option<&'static str>) {
        match self {
            Verb::Identify => (&[], &[], None),
            Verb::ListMetadataFormats => (&[], &["identifier"], None),
            Verb::ListSets => (&[], &[], Some("resumptionToken")),
            Verb::ListIdentifiers | Verb::ListRecords => {
                (&["metadataPrefix"], &["from", "until", "set"], Some("resumptionToken"))
            }
            Verb::GetRecord => (&["identifier", "metadataPrefix"], &[], None),
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OaiErrorCode {
    BadVerb,
    BadArgument,
    BadResumptionToken,
    CannotDisseminateFormat,
    IdDoesNotExist,
    NoRecordsMatch,
    NoMetadataFormats,
    NoSetHierarchy,
}

impl OaiErrorCode {
    pub const ALL: [OaiErrorCode; 8] = [
        OaiErrorCode::BadVerb,
        OaiErrorCode::BadArgument,
        OaiErrorCode::BadResumptionToken,
        OaiErrorCode::CannotDisseminateFormat,
        OaiErrorCode::IdDoesNotExist,
        OaiErrorCode::NoRecordsMatch,
        OaiErrorCode::NoMetadataFormats,
        OaiErrorCode::NoSetHierarchy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OaiErrorCode::BadVerb => "badVerb",
            OaiErrorCode::BadArgument => "badArgument",
            OaiErrorCode::BadResumptionToken => "badResumptionToken",
            OaiErrorCode::CannotDisseminateFormat => "cannotDisseminateFormat",
            OaiErrorCode::IdDoesNotExist => "idDoesNotExist",
            OaiErrorCode::NoRecordsMatch => "noRecordsMatch",
            OaiErrorCode::NoMetadataFormats => "noMetadataFormats",
            OaiErrorCode::NoSetHierarchy => "noSetHierarchy",
        }
    }

    pub fn parse(s: &str) -> Option<OaiErrorCode> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for OaiErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code}: {message}")]
pub struct OaiError {
    pub code: OaiErrorCode,
    pub message: String,
}

impl OaiError {
    pub fn new(code: OaiErrorCode, message: impl Into<String>) -> Self {
        OaiError { code, message: message.into() }
    }
}

/// A syntactically valid request: known verb, legal argument set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OaiRequest {
    pub verb: Verb,
    pub arguments: BTreeMap<String, String>,
}

impl OaiRequest {
    pub fn arg(&self, name: &str) -> Option<&str> {
        self.arguments.get(name).map(String::as_str)
    }
}

/// Checks verb and argument legality. Values are not interpreted here
/// except that every argument must be non-empty.
pub fn parse_request<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<OaiRequest, OaiError> {
    let mut verbs = pairs.iter().filter(|(k, _)| k.as_ref() == "verb");
    let verb = match (verbs.next(), verbs.next()) {
        (None, _) => return Err(OaiError::new(OaiErrorCode::BadVerb, "missing verb argument")),
        (Some(_), Some(_)) => return Err(OaiError::new(OaiErrorCode::BadVerb, "verb argument repeated")),
        (Some((_, v)), None) => Verb::parse(v.as_ref())
            .ok_or_else(|| OaiError::new(OaiErrorCode::BadVerb, format!("illegal verb {:?}", v.as_ref())))?,
    };
    let (required, optional, exclusive) = verb.arguments();
    let mut arguments = BTreeMap::new();
    for (k, v) in pairs {
        let (k, v) = (k.as_ref(), v.as_ref());
        if k == "verb" {
            continue;
        }
        let legal = required.contains(&k) || optional.contains(&k) || exclusive == Some(k);
        if !legal {
            return Err(OaiError::new(OaiErrorCode::BadArgument, format!("illegal argument {k:?} for {verb}")));
        }
        if v.is_empty() {
            return Err(OaiError::new(OaiErrorCode::BadArgument, format!("empty value for {k}")));
        }
        if arguments.insert(k.to_string(), v.to_string()).is_some() {
            return Err(OaiError::new(OaiErrorCode::BadArgument, format!("argument {k} repeated")));
        }
    }
    if let Some(ex) = exclusive {
        if arguments.contains_key(ex) {
            if arguments.len() > 1 {
                return Err(OaiError::new(OaiErrorCode::BadArgument, format!("{ex} is an exclusive argument")));
            }
            return Ok(OaiRequest { verb, arguments });
        }
    }
    if let Some(missing) = required.iter().find(|r| !arguments.contains_key(**r)) {
        return Err(OaiError::new(OaiErrorCode::BadArgument, format!("missing required argument {missing}")));
    }
    Ok(OaiRequest { verb, arguments })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataFormat {
    pub prefix: String,
    pub schema: String,
    pub namespace: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetInfo {
    pub spec: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub identifier: String,
    pub datestamp: DateTime<Utc>,
    pub sets: Vec<String>,
    pub deleted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OaiRecord {
    pub header: Header,
    /// XML of the metadata element's single child; absent for deleted records.
    pub metadata: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumptionInfo {
    /// Empty on the last page of a multi-page list.
    pub token: String,
    pub complete_list_size: usize,
    pub cursor: usize,
    pub expiration: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifyInfo {
    pub repository_name: String,
    pub base_url: String,
    pub earliest_datestamp: DateTime<Utc>,
    pub admin_emails: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OaiPayload {
    Identify(IdentifyInfo),
    ListMetadataFormats(Vec<MetadataFormat>),
    ListSets(Vec<SetInfo>),
    ListIdentifiers(Vec<Header>, Option<ResumptionInfo>),
    ListRecords(Vec<OaiRecord>, Option<ResumptionInfo>),
    GetRecord(OaiRecord),
    Errors(Vec<OaiError>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OaiResponse {
    pub response_date: DateTime<Utc>,
    pub base_url: String,
    /// Echoed request attributes; `None` when the request itself was
    /// rejected (badVerb, badArgument) and only the base URL is echoed.
    pub request: Option<OaiRequest>,
    pub payload: OaiPayload,
}

impl OaiResponse {
    pub fn errors(&self) -> &[OaiError] {
        match &self.payload {
            OaiPayload::Errors(e) => e,
            _ => &[],
        }
    }
}
