//! Harvesting engine: pulls documents from configured sources, crosswalks
//! them and applies changes to a [`Catalog`].
//!
//! Change detection compares each record's [`Fingerprint`] with the one
//! remembered in [`HarvestState::known`]; unchanged records do not touch the
//! store or the index.

mod schedule;
mod sources;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crosswalk::{crosswalk, ParseOptions};
use crate::datetime::{datestamp_serde, opt_date_serde};
use crate::oaipmh::client::Transport;
use crate::oaipmh::server::prefix_schema;
use crate::oaipmh::HarvestError;
use crate::record::{fingerprint, qualified_identifier, Fingerprint, MetadataRecord, SchemaKind};
use crate::snapshot::write_atomic;
use crate::store::{Catalog, StoreError};

pub use schedule::{schedule_loop, ScheduleEvent};
pub use sources::{list_directory, parse_listing_links};

pub const MIN_INTERVAL: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    OaiPmh,
    Directory,
    HttpListing,
}

mod interval_serde {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&humantime::format_duration(*d).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let s = String::deserialize(d)?;
        humantime::parse_duration(&s).map_err(D::Error::custom)
    }
}

fn default_interval() -> Duration {
    Duration::from_secs(24 * 3600)
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub source_id: String,
    pub kind: SourceKind,
    /// Base URL for OAI-PMH and HTTP listings, directory path otherwise.
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata_prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
    /// Harvest interval, e.g. `"6h"` or `"30m"`.
    #[serde(with = "interval_serde", default = "default_interval")]
    pub schedule: Duration,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("source_id must be non-empty and contain no whitespace or ':' (got {0:?})")]
    BadSourceId(String),
    #[error("source {0}: interval must be at least one minute")]
    IntervalTooShort(String),
    #[error("duplicate source_id {0}")]
    DuplicateSource(String),
}

impl SourceDescriptor {
    pub fn new(source_id: impl Into<String>, kind: SourceKind, location: impl Into<String>) -> Self {
        SourceDescriptor {
            source_id: source_id.into(),
            kind,
            location: location.into(),
            metadata_prefix: None,
            set: None,
            schedule: default_interval(),
            enabled: true,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let id = &self.source_id;
        if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == ':') {
            return Err(ConfigError::BadSourceId(id.clone()));
        }
        if self.schedule < MIN_INTERVAL {
            return Err(ConfigError::IntervalTooShort(id.clone()));
        }
        Ok(())
    }

    pub fn metadata_prefix(&self) -> &str {
        self.metadata_prefix.as_deref().unwrap_or("oai_dc")
    }
}

/// Checks every descriptor and that source ids are unique.
pub fn validate_sources(sources: &[SourceDescriptor]) -> Result<(), ConfigError> {
    let mut seen = HashSet::new();
    for s in sources {
        s.validate()?;
        if !seen.insert(s.source_id.as_str()) {
            return Err(ConfigError::DuplicateSource(s.source_id.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestState {
    pub source_id: String,
    #[serde(with = "opt_date_serde", default)]
    pub last_success: Option<DateTime<Utc>>,
    #[serde(with = "opt_date_serde", default)]
    pub high_watermark: Option<DateTime<Utc>>,
    #[serde(default)]
    pub known: BTreeMap<String, Fingerprint>,
    #[serde(default)]
    pub consecutive_failures: u32,
}

impl HarvestState {
    pub fn new(source_id: impl Into<String>) -> Self {
        HarvestState { source_id: source_id.into(), ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarvestMode {
    Full,
    Incremental,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestCounts {
    pub fetched: usize,
    pub added: usize,
    pub updated: usize,
    pub unchanged: usize,
    pub deleted: usize,
    pub failed: usize,
}

impl HarvestCounts {
    pub fn is_balanced(&self) -> bool {
        self.fetched == self.added + self.updated + self.unchanged + self.deleted + self.failed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestReport {
    pub source_id: String,
    pub mode: HarvestMode,
    #[serde(with = "datestamp_serde")]
    pub started: DateTime<Utc>,
    #[serde(with = "datestamp_serde")]
    pub finished: DateTime<Utc>,
    #[serde(flatten)]
    pub counts: HarvestCounts,
    /// Local records removed by a full harvest because the provider no
    /// longer lists them. Not part of `fetched`.
    pub purged: usize,
    pub errors: Vec<String>,
    pub success: bool,
}

#[derive(Debug, Error)]
pub enum HarvestRunError {
    #[error("source {0} is disabled")]
    SourceDisabled(String),
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("provider error: {0}")]
    Provider(HarvestError),
    #[error("store error: {0}")]
    Store(#[from] StoreError),
    #[error("harvest of {0} is already running")]
    AlreadyRunning(String),
    #[error("harvest interrupted after {0} records")]
    Interrupted(usize),
}

impl From<HarvestError> for HarvestRunError {
    fn from(e: HarvestError) -> Self {
        match e {
            HarvestError::Transport(m) => HarvestRunError::SourceUnavailable(m),
            other => HarvestRunError::Provider(other),
        }
    }
}

/// A failed harvest still produces a report and an updated state.
#[derive(Debug)]
pub struct HarvestFailure {
    pub error: HarvestRunError,
    pub report: HarvestReport,
    pub state: HarvestState,
}

impl fmt::Display for HarvestFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

#[derive(Debug, Clone, Default)]
pub struct HarvestOptions {
    /// Fault injection: abort with [`HarvestRunError::Interrupted`] after
    /// this many records have been processed, without saving state.
    pub stop_after_records: Option<usize>,
}

/// One document (or deletion) as delivered by a source.
#[derive(Debug, Clone)]
pub(crate) struct Fetched {
    pub local_id: String,
    pub datestamp: DateTime<Utc>,
    pub deleted: bool,
    pub sets: Vec<String>,
    pub document: Result<Vec<u8>, String>,
}

/// Per-harvest bookkeeping shared by all source kinds.
pub(crate) struct Session<'a> {
    source: &'a SourceDescriptor,
    catalog: &'a Catalog,
    pub state: HarvestState,
    pub counts: HarvestCounts,
    pub errors: Vec<String>,
    pub seen: HashSet<String>,
    pub max_datestamp: Option<DateTime<Utc>>,
    options: &'a HarvestOptions,
}

const MAX_REPORTED_ERRORS: usize = 100;

impl Session<'_> {
    fn note_error(&mut self, msg: String) {
        if self.errors.len() < MAX_REPORTED_ERRORS {
            self.errors.push(msg);
        }
    }

    pub fn process(&mut self, item: Fetched) -> Result<(), HarvestRunError> {
        self.counts.fetched += 1;
        self.apply_item(item)?;
        match self.options.stop_after_records {
            Some(limit) if self.counts.fetched >= limit => Err(HarvestRunError::Interrupted(self.counts.fetched)),
            _ => Ok(()),
        }
    }

    fn apply_item(&mut self, item: Fetched) -> Result<(), HarvestRunError> {
        let source_id = self.source.source_id.clone();
        let identifier = qualified_identifier(&source_id, &item.local_id);
        self.seen.insert(identifier.clone());
        self.max_datestamp = self.max_datestamp.max(Some(item.datestamp));

        if item.deleted {
            let existing = self.catalog.get(&identifier);
            if existing.as_ref().is_some_and(|r| r.deleted && r.datestamp == item.datestamp) {
                self.counts.unchanged += 1;
                return Ok(());
            }
            let schema = existing
                .map(|r| r.schema)
                .or_else(|| prefix_schema(self.source.metadata_prefix()))
                .unwrap_or(SchemaKind::OaiDc);
            let tomb = MetadataRecord::tombstone(identifier.clone(), source_id, schema, item.datestamp, item.sets);
            self.catalog.apply(tomb)?;
            self.state.known.remove(&identifier);
            self.counts.deleted += 1;
            return Ok(());
        }

        let doc = match item.document {
            Ok(d) => d,
            Err(e) => {
                self.counts.failed += 1;
                self.note_error(format!("{identifier}: {e}"));
                return Ok(());
            }
        };
        let opts = ParseOptions {
            source_id,
            local_id: Some(item.local_id),
            datestamp: Some(item.datestamp),
            sets: item.sets,
        };
        let record = match crosswalk(&doc, &opts) {
            Ok(r) => r,
            Err(e) => {
                self.counts.failed += 1;
                self.note_error(format!("{identifier}: {} ({e})", e.kind()));
                return Ok(());
            }
        };
        let fp = fingerprint(&record);
        // Fall back to the store when the state file lags behind it, e.g.
        // after a harvest that stopped before saving state.
        let previous = self.state.known.get(&identifier).copied().or_else(|| {
            self.catalog.get(&identifier).filter(|r| !r.deleted).map(|r| fingerprint(&r))
        });
        match previous {
            Some(old) if old == fp => {
                self.state.known.insert(identifier, fp);
                self.counts.unchanged += 1;
                return Ok(());
            }
            Some(_) => self.counts.updated += 1,
            None => self.counts.added += 1,
        }
        self.catalog.apply(record)?;
        self.state.known.insert(identifier, fp);
        Ok(())
    }

    /// Tombstones live local records of this source that were not seen.
    fn purge_unseen(&mut self, now: DateTime<Utc>) -> Result<usize, HarvestRunError> {
        let view = self.catalog.view();
        let stale: Vec<_> = view
            .iter()
            .filter(|e| !e.record.deleted && e.record.source_id == self.source.source_id)
            .filter(|e| !self.seen.contains(&e.record.identifier))
            .map(|e| Arc::clone(&e.record))
            .collect();
        for r in &stale {
            let tomb = MetadataRecord::tombstone(r.identifier.clone(), r.source_id.clone(), r.schema, now, r.sets.clone());
            self.catalog.apply(tomb)?;
            self.state.known.remove(&r.identifier);
        }
        Ok(stale.len())
    }
}

/// Runs one harvest of `source` against `catalog`.
///
/// Incremental mode asks OAI-PMH providers for records from the high
/// watermark (inclusive) and directory sources for files modified after the
/// last success; HTTP listings are always fully enumerated and rely on
/// fingerprints. Full mode enumerates everything and then tombstones local
/// records of the source that were not seen.
pub async fn run_harvest(
    source: &SourceDescriptor,
    state: HarvestState,
    mode: HarvestMode,
    catalog: &Catalog,
    transport: &dyn Transport,
    options: &HarvestOptions,
) -> Result<(HarvestReport, HarvestState), HarvestFailure> {
    let started = Utc::now();
    let mut session = Session {
        source,
        catalog,
        state,
        counts: HarvestCounts::default(),
        errors: Vec::new(),
        seen: HashSet::new(),
        max_datestamp: None,
        options,
    };
    let result = if !source.enabled {
        Err(HarvestRunError::SourceDisabled(source.source_id.clone()))
    } else {
        match source.kind {
            SourceKind::OaiPmh => sources::harvest_oai(&mut session, mode, transport).await,
            SourceKind::Directory => sources::harvest_directory(&mut session, mode),
            SourceKind::HttpListing => sources::harvest_listing(&mut session, transport).await,
        }
    };
    let mut purged = 0;
    let result = result.and_then(|()| {
        if mode == HarvestMode::Full {
            purged = session.purge_unseen(Utc::now())?;
        }
        Ok(())
    });
    let _ = catalog.sync();

    let mut report = HarvestReport {
        source_id: source.source_id.clone(),
        mode,
        started,
        finished: Utc::now(),
        counts: session.counts,
        purged,
        errors: std::mem::take(&mut session.errors),
        success: result.is_ok(),
    };
    let mut state = session.state;
    match result {
        Ok(()) => {
            let c = &report.counts;
            if c.failed * 2 > c.fetched {
                report.errors.push(format!("{} of {} records failed; watermark not advanced", c.failed, c.fetched));
            } else {
                state.high_watermark = state.high_watermark.max(session.max_datestamp);
                state.last_success = Some(crate::datetime::truncate_to_seconds(started));
            }
            state.consecutive_failures = 0;
            Ok((report, state))
        }
        Err(error) => {
            report.errors.push(error.to_string());
            state.consecutive_failures += 1;
            Err(HarvestFailure { error, report, state })
        }
    }
}

/// Persists one JSON file per source under a directory.
#[derive(Debug, Clone)]
pub struct StateStore {
    dir: Option<PathBuf>,
    memory: Arc<Mutex<HashMap<String, HarvestState>>>,
}

fn state_file_name(source_id: &str) -> String {
    let safe: String = source_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c.to_string() } else { format!("%{:02X}", c as u32) })
        .collect();
    format!("{safe}.json")
}

impl StateStore {
    pub fn in_memory() -> Self {
        StateStore { dir: None, memory: Arc::default() }
    }

    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(StateStore { dir: Some(dir.as_ref().to_path_buf()), memory: Arc::default() })
    }

    pub fn load(&self, source_id: &str) -> io::Result<HarvestState> {
        if let Some(s) = self.memory.lock().unwrap_or_else(|p| p.into_inner()).get(source_id) {
            return Ok(s.clone());
        }
        let Some(dir) = &self.dir else { return Ok(HarvestState::new(source_id)) };
        match fs::read(dir.join(state_file_name(source_id))) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(HarvestState::new(source_id)),
            Err(e) => Err(e),
        }
    }

    /// Writes atomically (temp file and rename).
    pub fn save(&self, state: &HarvestState) -> io::Result<()> {
        if let Some(dir) = &self.dir {
            let bytes = serde_json::to_vec_pretty(state).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            write_atomic(&dir.join(state_file_name(&state.source_id)), &bytes)?;
        }
        self.memory.lock().unwrap_or_else(|p| p.into_inner()).insert(state.source_id.clone(), state.clone());
        Ok(())
    }
}

/// Appends reports as JSON lines.
pub fn append_audit(path: &Path, report: &HarvestReport) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut line = serde_json::to_vec(report).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    line.push(b'\n');
    OpenOptions::new().create(true).append(true).open(path)?.write_all(&line)
}

/// Ties a catalog, harvest state and transport together, allowing one
/// in-flight harvest per source.
pub struct Harvester {
    catalog: Arc<Catalog>,
    states: StateStore,
    transport: Arc<dyn Transport>,
    audit_log: Option<PathBuf>,
    running: Mutex<HashSet<String>>,
    last_reports: Mutex<BTreeMap<String, HarvestReport>>,
}

struct RunningGuard<'a> {
    set: &'a Mutex<HashSet<String>>,
    id: String,
}

impl Drop for RunningGuard<'_> {
    fn drop(&mut self) {
        self.set.lock().unwrap_or_else(|p| p.into_inner()).remove(&self.id);
    }
}

impl Harvester {
    pub fn new(catalog: Arc<Catalog>, states: StateStore, transport: Arc<dyn Transport>) -> Self {
        Harvester {
            catalog,
            states,
            transport,
            audit_log: None,
            running: Mutex::default(),
            last_reports: Mutex::default(),
        }
    }

    pub fn with_audit_log(mut self, path: impl Into<PathBuf>) -> Self {
        self.audit_log = Some(path.into());
        self
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn states(&self) -> &StateStore {
        &self.states
    }

    pub fn is_running(&self, source_id: &str) -> bool {
        self.running.lock().unwrap_or_else(|p| p.into_inner()).contains(source_id)
    }

    /// Most recent report per source from this process.
    pub fn last_reports(&self) -> BTreeMap<String, HarvestReport> {
        self.last_reports.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub async fn harvest(&self, source: &SourceDescriptor, mode: HarvestMode) -> Result<HarvestReport, HarvestRunError> {
        self.harvest_with(source, mode, &HarvestOptions::default()).await
    }

    /// Runs a harvest, persisting state and the audit line whatever the
    /// outcome (except an injected interruption, which models a crash).
    pub async fn harvest_with(
        &self,
        source: &SourceDescriptor,
        mode: HarvestMode,
        options: &HarvestOptions,
    ) -> Result<HarvestReport, HarvestRunError> {
        let _guard = {
            let mut running = self.running.lock().unwrap_or_else(|p| p.into_inner());
            if !running.insert(source.source_id.clone()) {
                return Err(HarvestRunError::AlreadyRunning(source.source_id.clone()));
            }
            RunningGuard { set: &self.running, id: source.source_id.clone() }
        };
        let state = self.states.load(&source.source_id).map_err(StoreError::Io)?;
        let outcome = run_harvest(source, state, mode, &self.catalog, self.transport.as_ref(), options).await;
        let (report, state, error) = match outcome {
            Ok((report, state)) => (report, state, None),
            Err(HarvestFailure { error: e @ HarvestRunError::Interrupted(_), .. }) => return Err(e),
            Err(f) => (f.report, f.state, Some(f.error)),
        };
        self.states.save(&state).map_err(StoreError::Io)?;
        if let Some(path) = &self.audit_log {
            if let Err(e) = append_audit(path, &report) {
                tracing::warn!(error = %e, "could not append harvest audit line");
            }
        }
        tracing::info!(
            source = %report.source_id,
            fetched = report.counts.fetched,
            added = report.counts.added,
            updated = report.counts.updated,
            deleted = report.counts.deleted,
            failed = report.counts.failed,
            success = report.success,
            "harvest finished"
        );
        self.last_reports
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(report.source_id.clone(), report.clone());
        match error {
            None => Ok(report),
            Some(e) => Err(e),
        }
    }
}
