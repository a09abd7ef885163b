//! JSON search and record endpoints.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use axum::extract::{Path, RawQuery, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::{DateTime, Utc};
use metaharvest_core::datetime::parse_flexible_date;
use metaharvest_core::index::{parse_query, snippet, FacetField, Query, SearchResult, SortOrder, SpatialRelation};
use metaharvest_core::record::{GeoBoundingBox, MetadataRecord, RecordError};
use serde::Serialize;
use serde_json::{json, Value};

use crate::AppState;

pub const MAX_SIZE: usize = 100;
/// Deepest result reachable by paging: `(page + 1) * size`.
pub const MAX_DEPTH: usize = 100_000;

/// A 4xx response with a machine-readable body.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub error: &'static str,
    pub message: String,
    pub position: Option<usize>,
}

impl ApiError {
    pub fn bad_request(error: &'static str, message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, error, message: message.into(), position: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.error, "message": self.message });
        if let Some(p) = self.position {
            body["position"] = json!(p);
        }
        (self.status, Json(body)).into_response()
    }
}

/// Parsed `/api/search` (and `/rss`) parameters.
#[derive(Debug, Clone)]
pub struct SearchRequest {
    pub text: Option<String>,
    pub query: Query,
    pub page: usize,
    pub size: usize,
    pub facets: Vec<FacetField>,
    pub sort: SortOrder,
}

pub fn query_pairs(raw: Option<&str>) -> Vec<(String, String)> {
    url::form_urlencoded::parse(raw.unwrap_or_default().as_bytes()).into_owned().collect()
}

fn parse_bbox(raw: &str) -> Result<GeoBoundingBox, ApiError> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(ApiError::bad_request("BadBbox", format!("bbox needs 4 comma-separated numbers, got {}", parts.len())));
    }
    let mut v = [0.0; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|_| ApiError::bad_request("BadBbox", format!("not a number: {p:?}")))?;
    }
    GeoBoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| match e {
        RecordError::CoordinateOutOfRange(m) => ApiError::bad_request("CoordinateOutOfRange", m),
        other => ApiError::bad_request("BadBbox", other.to_string()),
    })
}

fn parse_date(name: &str, raw: &str) -> Result<DateTime<Utc>, ApiError> {
    parse_flexible_date(raw).ok_or_else(|| ApiError::bad_request("BadDate", format!("{name}: cannot parse {raw:?} as a date")))
}

fn parse_number(name: &str, raw: &str) -> Result<usize, ApiError> {
    raw.trim().parse().map_err(|_| ApiError::bad_request("BadParameter", format!("{name} must be a non-negative integer")))
}

pub fn parse_search(pairs: &[(String, String)], default_size: usize) -> Result<SearchRequest, ApiError> {
    let mut params: BTreeMap<&str, &str> = BTreeMap::new();
    for (k, v) in pairs {
        if params.insert(k.as_str(), v.as_str()).is_some() {
            return Err(ApiError::bad_request("DuplicateParameter", format!("{k} given more than once")));
        }
    }
    let text = params.get("q").map(|q| q.trim()).filter(|q| !q.is_empty()).map(str::to_string);
    let mut query = match &text {
        None => Query::match_all(),
        Some(q) => parse_query(q).map_err(|e| ApiError {
            status: StatusCode::BAD_REQUEST,
            error: e.kind(),
            message: e.to_string(),
            position: e.position(),
        })?,
    };
    let relation = match params.get("spatial_rel") {
        None => SpatialRelation::Intersects,
        Some(r) => SpatialRelation::parse(r)
            .ok_or_else(|| ApiError::bad_request("BadParameter", "spatial_rel must be intersects, contains or within"))?,
    };
    if let Some(b) = params.get("bbox") {
        query = query.with_spatial(parse_bbox(b)?, relation);
    }
    let start = params.get("start").map(|s| parse_date("start", s)).transpose()?;
    let end = params.get("end").map(|s| parse_date("end", s)).transpose()?;
    if let (Some(s), Some(e)) = (start, end) {
        if s > e {
            return Err(ApiError::bad_request("BadDate", "start is after end"));
        }
    }
    query = query.with_temporal(start, end);

    let page = params.get("page").map(|p| parse_number("page", p)).transpose()?.unwrap_or(0);
    let size = params.get("size").map(|p| parse_number("size", p)).transpose()?.unwrap_or(default_size);
    if !(1..=MAX_SIZE).contains(&size) {
        return Err(ApiError::bad_request("BadParameter", format!("size must be between 1 and {MAX_SIZE}")));
    }
    if page.checked_add(1).and_then(|p| p.checked_mul(size)).is_none_or(|depth| depth > MAX_DEPTH) {
        return Err(ApiError::bad_request("PageTooDeep", format!("results beyond {MAX_DEPTH} are not reachable by paging")));
    }
    let mut facets = Vec::new();
    for name in params.get("facets").into_iter().flat_map(|f| f.split(',')).map(str::trim).filter(|f| !f.is_empty()) {
        let field = FacetField::from_name(name).ok_or_else(|| ApiError::bad_request("BadParameter", format!("unknown facet {name:?}")))?;
        if !facets.contains(&field) {
            facets.push(field);
        }
    }
    let sort = match params.get("sort").copied() {
        None | Some("relevance") => SortOrder::Relevance,
        Some("date") => SortOrder::DatestampDesc,
        Some(other) => return Err(ApiError::bad_request("BadParameter", format!("unknown sort {other:?}"))),
    };
    Ok(SearchRequest { text, query, page, size, facets, sort })
}

pub fn run_search(state: &AppState, req: &SearchRequest) -> Result<SearchResult, ApiError> {
    state
        .catalog
        .search_snapshot()
        .search_sorted(&req.query, req.page, req.size, &req.facets, req.sort)
        .map_err(|e| ApiError::bad_request("BadParameter", e.to_string()))
}

#[derive(Serialize)]
struct Hit<'a> {
    id: &'a str,
    title: &'a str,
    abstract_snippet: String,
    source: &'a str,
    schema: metaharvest_core::record::SchemaKind,
    bbox: Option<GeoBoundingBox>,
    temporal: Option<metaharvest_core::record::TemporalExtent>,
    datestamp: String,
    score: f64,
    data_urls: &'a [String],
}

pub async fn search(State(state): State<Arc<AppState>>, RawQuery(raw): RawQuery) -> Result<Json<Value>, ApiError> {
    let req = parse_search(&query_pairs(raw.as_deref()), state.config.page_size)?;
    let result = run_search(&state, &req)?;
    let hits: Vec<Hit> = result
        .hits
        .iter()
        .map(|h| Hit {
            id: &h.identifier,
            title: &h.record.title,
            abstract_snippet: snippet(&h.record.r#abstract),
            source: &h.record.source_id,
            schema: h.record.schema,
            bbox: h.record.bbox,
            temporal: h.record.temporal,
            datestamp: metaharvest_core::datetime::format_datestamp(&h.record.datestamp),
            score: h.score,
            data_urls: &h.record.data_urls,
        })
        .collect();
    let facets: BTreeMap<&str, Vec<Value>> = result
        .facets
        .iter()
        .map(|(f, counts)| (f.name(), counts.iter().map(|(value, count)| json!({ "value": value, "count": count })).collect()))
        .collect();
    Ok(Json(json!({
        "total": result.total_hits,
        "page": req.page,
        "size": req.size,
        "hits": hits,
        "facets": facets,
    })))
}

/// Record JSON without the raw document bytes.
pub fn record_json(record: &MetadataRecord) -> Value {
    let mut v = serde_json::to_value(record).expect("records serialize");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("raw_document");
        obj.insert("raw_document_available".into(), json!(record.raw_document.is_some()));
    }
    v
}

pub async fn record(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.catalog.get(&id) {
        Some(r) if !r.deleted => Json(record_json(&r)).into_response(),
        Some(_) => (StatusCode::NOT_FOUND, Json(json!({ "error": "NotFound", "id": id, "deleted": true }))).into_response(),
        None => (StatusCode::NOT_FOUND, Json(json!({ "error": "NotFound", "id": id }))).into_response(),
    }
}

pub async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    let writable = state.catalog.check_writable();
    let reports = state.harvester.last_reports();
    let mut sources = BTreeMap::new();
    let mut ids: Vec<&str> = state.config.sources.iter().map(|s| s.source_id.as_str()).collect();
    let configured: HashSet<&str> = ids.iter().copied().collect();
    ids.extend(reports.keys().map(String::as_str).filter(|id| !configured.contains(id)));
    for id in ids {
        let persisted = state.harvester.states().load(id).ok();
        let report = reports.get(id);
        sources.insert(
            id.to_string(),
            json!({
                "last_success": persisted.as_ref().and_then(|s| s.last_success).map(|t| t.to_rfc3339()),
                "consecutive_failures": persisted.as_ref().map_or(0, |s| s.consecutive_failures),
                "last_run": report.map(|r| json!({
                    "finished": r.finished.to_rfc3339(),
                    "success": r.success,
                    "counts": r.counts,
                })),
            }),
        );
    }
    let body = json!({
        "status": if writable.is_ok() { "ok" } else { "unavailable" },
        "record_count": state.catalog.live_count(),
        "last_harvest": sources,
        "error": writable.as_ref().err().map(|e| e.to_string()),
    });
    let status = if writable.is_ok() { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    (status, Json(body)).into_response()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(s: &str) -> Vec<(String, String)> {
        query_pairs(Some(s))
    }

    fn err(s: &str) -> ApiError {
        parse_search(&pairs(s), 10).unwrap_err()
    }

    #[test]
    fn defaults() {
        let r = parse_search(&[], 10).unwrap();
        assert_eq!(r.query, Query::match_all());
        assert_eq!((r.page, r.size, r.sort), (0, 10, SortOrder::Relevance));
    }

    #[test]
    fn filters_and_facets() {
        let r = parse_search(&pairs("q=title:eagles&bbox=-10,0,10,5&spatial_rel=within&start=2001&facets=source,schema"), 10).unwrap();
        let s = r.query.spatial.unwrap();
        assert_eq!(s.relation, SpatialRelation::Within);
        assert_eq!(s.bbox.west, -10.0);
        assert!(r.query.temporal.unwrap().end.is_none());
        assert_eq!(r.facets, [FacetField::Source, FacetField::Schema]);
    }

    #[test]
    fn rejects_malformed_input() {
        assert_eq!(err("bbox=181,0,10,10").error, "CoordinateOutOfRange");
        assert_eq!(err("bbox=1,2,3").error, "BadBbox");
        assert_eq!(err("bbox=a,b,c,d").error, "BadBbox");
        assert_eq!(err("start=yesterday").error, "BadDate");
        assert_eq!(err("start=2010&end=2001").error, "BadDate");
        assert_eq!(err("size=0").error, "BadParameter");
        assert_eq!(err("size=101").error, "BadParameter");
        assert_eq!(err("page=-1").error, "BadParameter");
        assert_eq!(err("page=1000&size=100").error, "PageTooDeep");
        assert_eq!(err("facets=color").error, "BadParameter");
        assert_eq!(err("q=a&q=b").error, "DuplicateParameter");
        let e = err("q=title:(eagles");
        assert_eq!(e.error, "SyntaxError");
        assert!(e.position.is_some());
    }
}
