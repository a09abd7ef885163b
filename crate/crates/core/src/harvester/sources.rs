//! Enumeration of OAI-PMH, directory and HTTP-listing sources.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::SystemTime;

use chrono::{DateTime, Utc};
use regex::Regex;
use url::Url;

use super::{Fetched, HarvestMode, HarvestRunError, Session};
use crate::datetime::truncate_to_seconds;
use crate::oaipmh::client::{format_at, ListRecordsRequest, OaiClient, Transport};

const MAX_LISTING_DEPTH: usize = 3;

pub(super) async fn harvest_oai(session: &mut Session<'_>, mode: HarvestMode, transport: &dyn Transport) -> Result<(), HarvestRunError> {
    let source = session.source;
    let client = OaiClient::new(transport, source.location.clone());
    let mut request = ListRecordsRequest::new(source.metadata_prefix());
    request.set = source.set.clone();
    if mode == HarvestMode::Incremental {
        if let Some(wm) = session.state.high_watermark {
            let info = client.identify().await?;
            request.from = Some(format_at(&wm, info.granularity));
        }
    }
    let mut stream = client.list_records(request);
    while let Some(rec) = stream.next().await? {
        let document = rec.metadata.ok_or_else(|| "record has no metadata".to_string());
        session.process(Fetched {
            local_id: rec.header.identifier,
            datestamp: rec.header.datestamp,
            deleted: rec.header.deleted,
            sets: rec.header.sets,
            document,
        })?;
    }
    Ok(())
}

/// XML files under `root` as (relative path with `/` separators, absolute
/// path, modification time), sorted by relative path.
pub fn list_directory(root: &Path) -> std::io::Result<Vec<(String, PathBuf, DateTime<Utc>)>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf, DateTime<Utc>)>) -> std::io::Result<()> {
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            let meta = entry.metadata()?;
            if meta.is_dir() {
                walk(root, &path, out)?;
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
                let rel = path
                    .strip_prefix(root)
                    .unwrap_or(&path)
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                let mtime: DateTime<Utc> = meta.modified().unwrap_or(SystemTime::UNIX_EPOCH).into();
                out.push((rel, path, mtime));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

pub(super) fn harvest_directory(session: &mut Session<'_>, mode: HarvestMode) -> Result<(), HarvestRunError> {
    let root = Path::new(&session.source.location);
    let files = list_directory(root)
        .map_err(|e| HarvestRunError::SourceUnavailable(format!("{}: {e}", root.display())))?;
    let since = match mode {
        HarvestMode::Incremental => session.state.last_success,
        HarvestMode::Full => None,
    };
    for (rel, path, mtime) in files {
        if since.is_some_and(|s| mtime <= s) {
            continue;
        }
        let document = fs::read(&path).map_err(|e| e.to_string());
        session.process(Fetched {
            local_id: rel,
            datestamp: truncate_to_seconds(mtime),
            deleted: false,
            sets: Vec::new(),
            document,
        })?;
    }
    Ok(())
}

static HREF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)href\s*=\s*(?:"([^"]*)"|'([^']*)')"#).expect("valid regex"));

/// Links in an HTML directory listing that point below `base`: XML
/// documents and subdirectories (ending in `/`). Queries and fragments are
/// dropped; duplicates removed; order preserved.
pub fn parse_listing_links(html: &str, base: &Url) -> Vec<Url> {
    let mut out: Vec<Url> = Vec::new();
    for cap in HREF.captures_iter(html) {
        let raw = cap.get(1).or_else(|| cap.get(2)).map(|m| m.as_str()).unwrap_or_default();
        if raw.contains('?') {
            continue;
        }
        let Ok(mut url) = base.join(raw) else { continue };
        url.set_fragment(None);
        if url == *base || !url.as_str().starts_with(base.as_str()) {
            continue;
        }
        let path = url.path().to_ascii_lowercase();
        if (path.ends_with(".xml") || path.ends_with('/')) && !out.contains(&url) {
            out.push(url);
        }
    }
    out
}

pub(super) async fn harvest_listing(session: &mut Session<'_>, transport: &dyn Transport) -> Result<(), HarvestRunError> {
    let mut base = Url::parse(&session.source.location)
        .map_err(|e| HarvestRunError::SourceUnavailable(format!("bad listing URL: {e}")))?;
    if !base.path().ends_with('/') {
        base.set_path(&format!("{}/", base.path()));
    }
    let mut pending = vec![(base.clone(), 0usize)];
    let mut documents = Vec::new();
    while let Some((dir, depth)) = pending.pop() {
        let resp = transport.get(dir.as_str(), &[]).await;
        let body = match resp {
            Ok(r) if r.status == 200 => r.body,
            Ok(r) if dir == base => return Err(HarvestRunError::SourceUnavailable(format!("{dir}: HTTP {}", r.status))),
            Err(e) if dir == base => return Err(HarvestRunError::SourceUnavailable(format!("{dir}: {e}"))),
            Ok(r) => {
                session.note_error(format!("{dir}: HTTP {}", r.status));
                continue;
            }
            Err(e) => {
                session.note_error(format!("{dir}: {e}"));
                continue;
            }
        };
        for link in parse_listing_links(&String::from_utf8_lossy(&body), &dir) {
            if link.path().ends_with('/') {
                if depth < MAX_LISTING_DEPTH {
                    pending.push((link, depth + 1));
                }
            } else {
                documents.push(link);
            }
        }
    }
    documents.sort();
    documents.dedup();
    let now = truncate_to_seconds(Utc::now());
    for url in documents {
        let local_id = url.as_str()[base.as_str().len()..].to_string();
        let (document, datestamp) = match transport.get(url.as_str(), &[]).await {
            Ok(r) if r.status == 200 => (Ok(r.body), r.last_modified.unwrap_or(now)),
            Ok(r) => (Err(format!("HTTP {}", r.status)), now),
            Err(e) => (Err(e), now),
        };
        session.process(Fetched { local_id, datestamp, deleted: false, sets: Vec::new(), document })?;
    }
    Ok(())
}
