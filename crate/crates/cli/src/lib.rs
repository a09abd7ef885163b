//! Command-line front end: harvest, search, crosswalk, serve, federation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use metaharvest_core::crosswalk::{crosswalk, detect_schema, ParseOptions};
use metaharvest_core::federation::{composite_uptime, federated_latency, simulate_availability, validate, FederationSourceStats};
use metaharvest_core::harvester::HarvestMode;
use metaharvest_core::index::snippet;
use metaharvest_core::record::SchemaKind;
use metaharvest_server::api::{parse_search, record_json, run_search};
use metaharvest_server::{AppState, Service, ServiceConfig};
use serde_json::json;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "metaharvest", version, about = "Harvest, index and search environmental metadata")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one harvest of a configured source and print its report as JSON.
    Harvest {
        #[arg(long)]
        source: String,
        /// Re-fetch everything instead of only changes since the last run.
        #[arg(long)]
        full: bool,
        /// Service config; defaults to $METAHARVEST_CONFIG.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Search the local record store.
    Search {
        query: String,
        /// W,S,E,N in degrees.
        #[arg(long, allow_hyphen_values = true)]
        bbox: Option<String>,
        #[arg(long, default_value = "intersects")]
        spatial_rel: String,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        end: Option<String>,
        #[arg(long, default_value_t = 10)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        page: usize,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Detect a document's metadata standard and print the unified record.
    Crosswalk {
        file: PathBuf,
        /// Source id for the record identifier.
        #[arg(long, default_value = "local")]
        source: String,
    },
    /// Run the search service with its harvest scheduler.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Composite uptime and latency of a federated search.
    Federation {
        /// JSON list of {"uptime": p, "latency": ms}.
        stats: PathBuf,
        /// Merge time added to the slowest source, in ms.
        #[arg(long, default_value_t = 0.0)]
        processing: f64,
        /// Also estimate availability by simulation with this many trials.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

/// Where a command writes: data to `out`, diagnostics to `err`.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

macro_rules! fail {
    ($io:expr, $code:expr, $($arg:tt)*) => {{
        let _ = writeln!($io.err, $($arg)*);
        return $code;
    }};
}

fn load_config(path: Option<&Path>, io: &mut Io) -> Result<ServiceConfig, u8> {
    ServiceConfig::load(path).map_err(|e| {
        let _ = writeln!(io.err, "error: {e}");
        EXIT_USAGE
    })
}

fn open_state(config: ServiceConfig, io: &mut Io) -> Result<AppState, u8> {
    AppState::open(config).map_err(|e| {
        let _ = writeln!(io.err, "error: {e}");
        EXIT_FAILURE
    })
}

fn print_json(io: &mut Io, value: &serde_json::Value) {
    let _ = writeln!(io.out, "{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

pub async fn run(cli: Cli, io: &mut Io<'_>) -> u8 {
    match cli.command {
        Command::Harvest { source, full, config } => harvest(&source, full, config.as_deref(), io).await,
        Command::Search { query, bbox, spatial_rel, start, end, size, page, json, config } => {
            let mut pairs = vec![("q".to_string(), query), ("spatial_rel".into(), spatial_rel)];
            pairs.push(("size".into(), size.to_string()));
            pairs.push(("page".into(), page.to_string()));
            for (k, v) in [("bbox", bbox), ("start", start), ("end", end)] {
                if let Some(v) = v {
                    pairs.push((k.into(), v));
                }
            }
            search(&pairs, json, config.as_deref(), io)
        }
        Command::Crosswalk { file, source } => crosswalk_file(&file, &source, io),
        Command::Serve { config } => serve(config.as_deref(), io).await,
        Command::Federation { stats, processing, trials, seed, json } => federation(&stats, processing, trials, seed, json, io),
    }
}

async fn harvest(source_id: &str, full: bool, config: Option<&Path>, io: &mut Io<'_>) -> u8 {
    let config = match load_config(config, io) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let Some(source) = config.sources.iter().find(|s| s.source_id == source_id).cloned() else {
        fail!(io, EXIT_USAGE, "error: no source {source_id:?} in the config");
    };
    let state = match open_state(config, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mode = if full { HarvestMode::Full } else { HarvestMode::Incremental };
    let result = state.harvester.harvest(&source, mode).await;
    if let Some(report) = state.harvester.last_reports().get(source_id) {
        print_json(io, &serde_json::to_value(report).expect("reports serialize"));
    }
    if let Err(e) = state.catalog.sync() {
        fail!(io, EXIT_FAILURE, "error: {e}");
    }
    match result {
        Ok(_) => EXIT_OK,
        Err(e) => fail!(io, EXIT_FAILURE, "error: harvest of {source_id} failed: {e}"),
    }
}

fn search(pairs: &[(String, String)], json: bool, config: Option<&Path>, io: &mut Io<'_>) -> u8 {
    let config = match load_config(config, io) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let request = match parse_search(pairs, config.page_size) {
        Ok(r) => r,
        Err(e) => match e.position {
            Some(p) => fail!(io, EXIT_USAGE, "error: {} at position {p}: {}", e.error, e.message),
            None => fail!(io, EXIT_USAGE, "error: {}: {}", e.error, e.message),
        },
    };
    let state = match open_state(config, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let result = match run_search(&state, &request) {
        Ok(r) => r,
        Err(e) => fail!(io, EXIT_USAGE, "error: {}", e.message),
    };
    if json {
        let hits: Vec<_> = result
            .hits
            .iter()
            .map(|h| json!({ "id": h.identifier, "score": h.score, "record": record_json(&h.record) }))
            .collect();
        print_json(io, &json!({ "total": result.total_hits, "page": request.page, "size": request.size, "hits": hits }));
    } else {
        let _ = writeln!(io.out, "{} results", result.total_hits);
        for h in &result.hits {
            let _ = writeln!(io.out, "{}\t{:.4}\t{}", h.identifier, h.score, h.record.title);
            let s = snippet(&h.record.r#abstract);
            if !s.is_empty() {
                let _ = writeln!(io.out, "\t{s}");
            }
        }
    }
    EXIT_OK
}

fn crosswalk_file(file: &Path, source: &str, io: &mut Io<'_>) -> u8 {
    let bytes = match std::fs::read(file) {
        Ok(b) => b,
        Err(e) => fail!(io, EXIT_USAGE, "error: cannot read {}: {e}", file.display()),
    };
    let mut opts = ParseOptions::new(source);
    // FGDC documents carry no identifier of their own.
    if detect_schema(&bytes) == Ok(SchemaKind::Fgdc) {
        opts.local_id = file.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    match crosswalk(&bytes, &opts) {
        Ok(record) => {
            print_json(io, &record_json(&record));
            EXIT_OK
        }
        Err(e) => fail!(io, EXIT_USAGE, "error: {}: {e}", e.kind()),
    }
}

async fn serve(config: Option<&Path>, io: &mut Io<'_>) -> u8 {
    let config = match load_config(config, io) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let service = match Service::bind(config).await {
        Ok(s) => s,
        Err(e) => fail!(io, EXIT_FAILURE, "error: {e}"),
    };
    if let Ok(addr) = service.local_addr() {
        let _ = writeln!(io.err, "listening on http://{addr}");
    }
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    match service.run(shutdown).await {
        Ok(()) => EXIT_OK,
        Err(e) => fail!(io, EXIT_FAILURE, "error: {e}"),
    }
}

fn federation(stats: &Path, processing: f64, trials: Option<u64>, seed: u64, json: bool, io: &mut Io<'_>) -> u8 {
    let text = match std::fs::read_to_string(stats) {
        Ok(t) => t,
        Err(e) => fail!(io, EXIT_USAGE, "error: cannot read {}: {e}", stats.display()),
    };
    let sources: Vec<FederationSourceStats> = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => fail!(io, EXIT_USAGE, "error: {}: {e}", stats.display()),
    };
    if let Err(e) = validate(&sources) {
        fail!(io, EXIT_USAGE, "error: {e}");
    }
    if !processing.is_finite() || processing < 0.0 {
        fail!(io, EXIT_USAGE, "error: processing time must be finite and non-negative");
    }
    let uptime = composite_uptime(&sources);
    let latency = match federated_latency(&sources, processing) {
        Ok(l) => l,
        Err(e) => fail!(io, EXIT_USAGE, "error: {e}"),
    };
    let simulated = trials.map(|t| simulate_availability(&sources, t, seed));
    if json {
        print_json(
            io,
            &json!({
                "sources": sources.len(),
                "composite_uptime": uptime,
                "federated_latency_ms": latency,
                "simulated_uptime": simulated,
            }),
        );
    } else {
        let _ = writeln!(io.out, "sources: {}", sources.len());
        let _ = writeln!(io.out, "composite uptime: {uptime}");
        let _ = writeln!(io.out, "federated latency: {latency} ms");
        if let Some(s) = simulated {
            let _ = writeln!(io.out, "simulated uptime: {s} ({} trials)", trials.unwrap_or(0));
        }
    }
    EXIT_OK
}
