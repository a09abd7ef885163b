//! RSS 2.0 and OpenSearch 1.1 documents.

use std::sync::Arc;

use axum::extract::{RawQuery, State};
use axum::http::header;
use axum::response::IntoResponse;
use metaharvest_core::crosswalk::xml::escape;
use metaharvest_core::index::{snippet, SortOrder};

use crate::api::{parse_search, query_pairs, run_search, ApiError};
use crate::AppState;

pub const RSS_ITEMS: usize = 50;

/// Percent-encodes an identifier for use as a path, keeping `/` and `:`.
pub fn encode_path(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~:/".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

pub fn rss_document(state: &AppState, pairs: &[(String, String)]) -> Result<String, ApiError> {
    let feed_params: Vec<(String, String)> =
        pairs.iter().filter(|(k, _)| matches!(k.as_str(), "q" | "bbox" | "spatial_rel" | "start" | "end")).cloned().collect();
    let mut req = parse_search(&feed_params, RSS_ITEMS)?;
    req.sort = SortOrder::DatestampDesc;
    let result = run_search(state, &req)?;
    let base = state.config.base_url();
    let title = match &req.text {
        Some(q) => format!("{}: {q}", state.config.repository_name),
        None => state.config.repository_name.clone(),
    };
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<rss version=\"2.0\">\n<channel>\n");
    out.push_str(&format!("<title>{}</title>\n", escape(&title)));
    out.push_str(&format!("<link>{}/</link>\n", escape(base)));
    out.push_str(&format!("<description>{} matching records</description>\n", result.total_hits));
    for hit in &result.hits {
        let r = &hit.record;
        out.push_str("<item>\n");
        out.push_str(&format!("<title>{}</title>\n", escape(&r.title)));
        out.push_str(&format!("<link>{}</link>\n", escape(&format!("{base}/api/records/{}", encode_path(&r.identifier)))));
        out.push_str(&format!("<description>{}</description>\n", escape(&snippet(&r.r#abstract))));
        out.push_str(&format!("<pubDate>{}</pubDate>\n", r.datestamp.to_rfc2822()));
        out.push_str(&format!("<guid isPermaLink=\"false\">{}</guid>\n", escape(&r.identifier)));
        out.push_str("</item>\n");
    }
    out.push_str("</channel>\n</rss>\n");
    Ok(out)
}

pub async fn rss(State(state): State<Arc<AppState>>, RawQuery(raw): RawQuery) -> Result<impl IntoResponse, ApiError> {
    let body = rss_document(&state, &query_pairs(raw.as_deref()))?;
    Ok(([(header::CONTENT_TYPE, "application/rss+xml; charset=utf-8")], body))
}

pub fn opensearch_document(state: &AppState) -> String {
    let c = &state.config;
    let base = c.base_url();
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<OpenSearchDescription xmlns="http://a9.com/-/spec/opensearch/1.1/">
<ShortName>{short}</ShortName>
<Description>Search the {name} metadata catalog</Description>
<InputEncoding>UTF-8</InputEncoding>
<OutputEncoding>UTF-8</OutputEncoding>
<Url type="application/json" indexOffset="0" template="{json}"/>
<Url type="application/rss+xml" template="{rss}"/>
</OpenSearchDescription>
"#,
        short = escape(&c.short_name()),
        name = escape(&c.repository_name),
        json = escape(&format!("{base}/api/search?q={{searchTerms}}&page={{startPage?}}")),
        rss = escape(&format!("{base}/rss?q={{searchTerms}}")),
    )
}

pub async fn opensearch(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/opensearchdescription+xml; charset=utf-8")], opensearch_document(&state))
}
