//! Harvesting client: issues list requests, follows resumption tokens and
//! retries transport failures.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use roxmltree::Node;
use thiserror::Error;

use super::{Header, OaiError, OaiErrorCode, OAI_PMH_NS};
use crate::crosswalk::xml;
use crate::datetime::{parse_oai_datestamp, Granularity};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub status: u16,
    pub retry_after: Option<Duration>,
    pub last_modified: Option<DateTime<Utc>>,
    pub body: Vec<u8>,
}

impl TransportResponse {
    pub fn ok(body: Vec<u8>) -> Self {
        TransportResponse { status: 200, retry_after: None, last_modified: None, body }
    }

    pub fn status(status: u16) -> Self {
        TransportResponse { status, retry_after: None, last_modified: None, body: Vec::new() }
    }
}

/// One HTTP GET of `base_url` with query parameters.
#[async_trait]
pub trait Transport: Send + Sync {
    async fn get(&self, base_url: &str, params: &[(String, String)]) -> Result<TransportResponse, String>;
}

#[async_trait]
impl<T: Transport + ?Sized> Transport for &T {
    async fn get(&self, base_url: &str, params: &[(String, String)]) -> Result<TransportResponse, String> {
        (**self).get(base_url, params).await
    }
}

#[async_trait]
impl<T: Transport + ?Sized> Transport for Arc<T> {
    async fn get(&self, base_url: &str, params: &[(String, String)]) -> Result<TransportResponse, String> {
        (**self).get(base_url, params).await
    }
}

#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: reqwest::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("metaharvest/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("HTTP client builds");
        HttpTransport { client }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

#[async_trait]
impl Transport for HttpTransport {
    async fn get(&self, base_url: &str, params: &[(String, String)]) -> Result<TransportResponse, String> {
        let url = url::Url::parse_with_params(base_url, params).map_err(|e| format!("bad base URL {base_url:?}: {e}"))?;
        let resp = self.client.get(url).send().await.map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let last_modified = resp
            .headers()
            .get(reqwest::header::LAST_MODIFIED)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| DateTime::parse_from_rfc2822(v).ok())
            .map(|d| d.with_timezone(&Utc));
        let body = resp.bytes().await.map_err(|e| e.to_string())?.to_vec();
        Ok(TransportResponse { status, retry_after, last_modified, body })
    }
}

/// Calls a function in-process instead of going over the network.
pub struct FnTransport<F>(pub F);

#[async_trait]
impl<F> Transport for FnTransport<F>
where
    F: Fn(&[(String, String)]) -> Result<TransportResponse, String> + Send + Sync,
{
    async fn get(&self, _base_url: &str, params: &[(String, String)]) -> Result<TransportResponse, String> {
        (self.0)(params)
    }
}

/// Wraps a transport and keeps every request's parameters.
pub struct RecordingTransport<T> {
    inner: T,
    log: Arc<Mutex<Vec<Vec<(String, String)>>>>,
}

impl<T> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport { inner, log: Arc::default() }
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }

    pub fn requests(&self) -> Vec<Vec<(String, String)>> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn clear(&self) {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clear();
    }
}

#[async_trait]
impl<T: Transport> Transport for RecordingTransport<T> {
    async fn get(&self, base_url: &str, params: &[(String, String)]) -> Result<TransportResponse, String> {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).push(params.to_vec());
        self.inner.get(base_url, params).await
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarvestError {
    #[error("provider returned {0}")]
    Protocol(OaiError),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

impl HarvestError {
    pub fn oai_code(&self) -> Option<OaiErrorCode> {
        match self {
            HarvestError::Protocol(e) => Some(e.code),
            _ => None,
        }
    }
}

/// Initial attempt plus `retries` more, waiting `initial_backoff`, then
/// doubling. A Retry-After header replaces the computed wait, capped.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub retries: u32,
    pub initial_backoff: Duration,
    pub max_retry_after: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { retries: 3, initial_backoff: Duration::from_secs(1), max_retry_after: Duration::from_secs(60) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ListRecordsRequest {
    pub metadata_prefix: String,
    pub from: Option<String>,
    pub until: Option<String>,
    pub set: Option<String>,
}

impl ListRecordsRequest {
    pub fn new(metadata_prefix: impl Into<String>) -> Self {
        ListRecordsRequest { metadata_prefix: metadata_prefix.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarvestedRecord {
    pub header: Header,
    /// Standalone XML of the metadata payload; `None` for deleted records.
    pub metadata: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderInfo {
    pub repository_name: String,
    pub granularity: Granularity,
    pub earliest_datestamp: Option<DateTime<Utc>>,
}

/// Formats an instant at the provider's granularity.
pub fn format_at(instant: &DateTime<Utc>, granularity: Granularity) -> String {
    match granularity {
        Granularity::Day => instant.format("%Y-%m-%d").to_string(),
        Granularity::Seconds => crate::datetime::format_datestamp(instant),
    }
}

pub struct OaiClient<T> {
    transport: T,
    base_url: String,
    retry: RetryPolicy,
}

fn is_oai(node: Node<'_, '_>, local: &str) -> bool {
    node.is_element() && node.tag_name().name() == local && node.tag_name().namespace().is_none_or(|ns| ns == OAI_PMH_NS)
}

fn child<'a, 'i>(node: Node<'a, 'i>, local: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| is_oai(*c, local))
}

fn malformed(m: impl Into<String>) -> HarvestError {
    HarvestError::MalformedResponse(m.into())
}

/// Fails on a non-OAI root or an in-band error.
fn check_errors(root: Node<'_, '_>) -> Result<(), HarvestError> {
    if !is_oai(root, "OAI-PMH") {
        return Err(malformed(format!("unexpected root element {}", root.tag_name().name())));
    }
    if let Some(err) = child(root, "error") {
        let code = err.attribute("code").unwrap_or_default();
        let code = OaiErrorCode::parse(code).ok_or_else(|| malformed(format!("unknown error code {code:?}")))?;
        return Err(HarvestError::Protocol(OaiError::new(code, xml::text(err))));
    }
    Ok(())
}

fn parse_header(node: Node<'_, '_>) -> Result<Header, HarvestError> {
    let identifier = child(node, "identifier").map(xml::text).filter(|s| !s.is_empty()).ok_or_else(|| malformed("header without identifier"))?;
    let raw_date = child(node, "datestamp").map(xml::text).unwrap_or_default();
    let (datestamp, _) = parse_oai_datestamp(&raw_date).ok_or_else(|| malformed(format!("bad datestamp {raw_date:?}")))?;
    let sets = node.children().filter(|c| is_oai(*c, "setSpec")).map(xml::text).collect();
    Ok(Header { identifier, datestamp, sets, deleted: node.attribute("status") == Some("deleted") })
}

/// Records and the next resumption token (if non-empty) from a ListRecords
/// response body.
pub fn parse_list_records(body: &[u8]) -> Result<(Vec<HarvestedRecord>, Option<String>), HarvestError> {
    let text = xml::decode(body).map_err(|e| malformed(e.to_string()))?;
    let doc = xml::parse_document(&text).map_err(|e| malformed(e.to_string()))?;
    let root = doc.root_element();
    match check_errors(root) {
        Err(HarvestError::Protocol(e)) if e.code == OaiErrorCode::NoRecordsMatch => return Ok((Vec::new(), None)),
        other => other?,
    }
    let list = child(root, "ListRecords").ok_or_else(|| malformed("missing ListRecords element"))?;
    let mut records = Vec::new();
    for rec in list.children().filter(|c| is_oai(*c, "record")) {
        let header = parse_header(child(rec, "header").ok_or_else(|| malformed("record without header"))?)?;
        let metadata = if header.deleted {
            None
        } else {
            let payload = child(rec, "metadata")
                .and_then(|m| m.children().find(|c| c.is_element()))
                .ok_or_else(|| malformed(format!("record {} has no metadata", header.identifier)))?;
            Some(xml::standalone_fragment(&text, payload).into_bytes())
        };
        records.push(HarvestedRecord { header, metadata });
    }
    let token = child(list, "resumptionToken").map(xml::text).filter(|t| !t.is_empty());
    Ok((records, token))
}

impl<T: Transport> OaiClient<T> {
    pub fn new(transport: T, base_url: impl Into<String>) -> Self {
        OaiClient { transport, base_url: base_url.into(), retry: RetryPolicy::default() }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    /// Fetches with retries. Network errors, 429 and 5xx are retried;
    /// other statuses are returned for the caller to interpret.
    async fn fetch(&self, params: &[(String, String)]) -> Result<Vec<u8>, HarvestError> {
        let mut wait = self.retry.initial_backoff;
        let mut attempt = 0;
        loop {
            let failure = match self.transport.get(&self.base_url, params).await {
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    (format!("HTTP {}", resp.status), resp.retry_after)
                }
                Ok(resp) if resp.status >= 400 && !looks_like_oai(&resp.body) => {
                    return Err(HarvestError::Transport(format!("HTTP {}", resp.status)));
                }
                Ok(resp) => return Ok(resp.body),
                Err(e) => (e, None),
            };
            if attempt >= self.retry.retries {
                return Err(HarvestError::Transport(format!("{} after {} attempts", failure.0, attempt + 1)));
            }
            let delay = failure.1.map(|d| d.min(self.retry.max_retry_after)).unwrap_or(wait);
            tracing::warn!(url = %self.base_url, error = %failure.0, delay_s = delay.as_secs_f64(), "retrying OAI request");
            tokio::time::sleep(delay).await;
            wait *= 2;
            attempt += 1;
        }
    }

    pub async fn identify(&self) -> Result<ProviderInfo, HarvestError> {
        let body = self.fetch(&[("verb".into(), "Identify".into())]).await?;
        let text = xml::decode(&body).map_err(|e| malformed(e.to_string()))?;
        let doc = xml::parse_document(&text).map_err(|e| malformed(e.to_string()))?;
        check_errors(doc.root_element())?;
        let ident = child(doc.root_element(), "Identify").ok_or_else(|| malformed("missing Identify element"))?;
        let granularity = match child(ident, "granularity").map(xml::text).as_deref() {
            Some("YYYY-MM-DD") => Granularity::Day,
            _ => Granularity::Seconds,
        };
        Ok(ProviderInfo {
            repository_name: child(ident, "repositoryName").map(xml::text).unwrap_or_default(),
            granularity,
            earliest_datestamp: child(ident, "earliestDatestamp")
                .and_then(|n| parse_oai_datestamp(&xml::text(n)))
                .map(|(d, _)| d),
        })
    }

    /// Pull-based stream over a ListRecords chain.
    pub fn list_records(&self, request: ListRecordsRequest) -> ListRecordsStream<'_, T> {
        ListRecordsStream { client: self, request, token: None, started: false, buffer: VecDeque::new(), pages: 0 }
    }

    /// Every record of a ListRecords chain; `noRecordsMatch` gives an empty list.
    pub async fn harvest_list_records(&self, request: ListRecordsRequest) -> Result<Vec<HarvestedRecord>, HarvestError> {
        let mut stream = self.list_records(request);
        let mut out = Vec::new();
        while let Some(r) = stream.next().await? {
            out.push(r);
        }
        Ok(out)
    }
}

fn looks_like_oai(body: &[u8]) -> bool {
    let head = &body[..body.len().min(512)];
    String::from_utf8_lossy(head).contains("OAI-PMH")
}

pub struct ListRecordsStream<'c, T> {
    client: &'c OaiClient<T>,
    request: ListRecordsRequest,
    token: Option<String>,
    started: bool,
    buffer: VecDeque<HarvestedRecord>,
    pages: usize,
}

impl<T: Transport> ListRecordsStream<'_, T> {
    /// Number of responses fetched so far.
    pub fn pages(&self) -> usize {
        self.pages
    }

    pub async fn next(&mut self) -> Result<Option<HarvestedRecord>, HarvestError> {
        loop {
            if let Some(r) = self.buffer.pop_front() {
                return Ok(Some(r));
            }
            let params: Vec<(String, String)> = match (&self.token, self.started) {
                (Some(t), _) => vec![("verb".into(), "ListRecords".into()), ("resumptionToken".into(), t.clone())],
                (None, true) => return Ok(None),
                (None, false) => {
                    let r = &self.request;
                    let mut p = vec![("verb".into(), "ListRecords".into()), ("metadataPrefix".into(), r.metadata_prefix.clone())];
                    for (k, v) in [("from", &r.from), ("until", &r.until), ("set", &r.set)] {
                        if let Some(v) = v {
                            p.push((k.into(), v.clone()));
                        }
                    }
                    p
                }
            };
            self.started = true;
            let body = self.client.fetch(&params).await?;
            self.pages += 1;
            let (records, token) = parse_list_records(&body)?;
            self.token = token;
            self.buffer.extend(records);
        }
    }
}
