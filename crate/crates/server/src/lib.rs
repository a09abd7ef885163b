//! HTTP search service: JSON search API, RSS and OpenSearch feeds, the
//! OAI-PMH provider endpoint and scheduled harvesting in one process.

pub mod api;
pub mod config;
pub mod feeds;

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{RawQuery, Request, State};
use axum::http::{header, Method};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use chrono::Utc;
use metaharvest_core::harvester::{schedule_loop, Harvester, StateStore};
use metaharvest_core::oaipmh::{handle_request, serialize_response, HttpTransport, RepositoryConfig};
use metaharvest_core::store::{Catalog, StoreError};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tower_http::cors::{Any, CorsLayer};

pub use config::{ServiceConfig, ServiceConfigError, CONFIG_ENV};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("record store: {0}")]
    Store(#[from] StoreError),
    #[error("harvest state directory {path}: {source}")]
    State { path: PathBuf, source: io::Error },
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("server: {0}")]
    Io(#[from] io::Error),
}

/// Everything a request handler can see.
pub struct AppState {
    pub config: ServiceConfig,
    pub repository: RepositoryConfig,
    pub catalog: Arc<Catalog>,
    pub harvester: Arc<Harvester>,
}

impl AppState {
    /// Opens the record store and harvest state named in `config`, failing
    /// if either is not writable.
    pub fn open(config: ServiceConfig) -> Result<Self, ServeError> {
        let catalog = Arc::new(Catalog::open(&config.paths.store)?);
        catalog.check_writable()?;
        let state_dir = config.paths.state.clone();
        let state_err = |source| ServeError::State { path: state_dir.clone(), source };
        let states = StateStore::open(&state_dir).map_err(state_err)?;
        let probe = state_dir.join(".write-probe");
        std::fs::write(&probe, b"ok").and_then(|_| std::fs::remove_file(&probe)).map_err(state_err)?;
        let secret = config::token_secret(&state_dir).map_err(state_err)?;
        let transport = Arc::new(HttpTransport::new(config.harvest_timeout));
        let harvester = Harvester::new(Arc::clone(&catalog), states, transport).with_audit_log(state_dir.join("audit.jsonl"));
        let mut state = Self::with_parts(config, catalog, Arc::new(harvester));
        state.repository.token_secret = secret;
        Ok(state)
    }

    /// Assembles a state from already-open parts.
    pub fn with_parts(config: ServiceConfig, catalog: Arc<Catalog>, harvester: Arc<Harvester>) -> Self {
        let mut repository = RepositoryConfig::new(config.repository_name.clone(), config.oai_base_url());
        repository.page_size = config.oai_page_size;
        if let Some(email) = &config.admin_email {
            repository.admin_emails = vec![email.clone()];
        }
        AppState { config, repository, catalog, harvester }
    }
}

fn oai_response(state: &AppState, pairs: &[(String, String)]) -> Response {
    let response = handle_request(pairs, &state.catalog.view(), &state.repository, Utc::now());
    ([(header::CONTENT_TYPE, "text/xml; charset=utf-8")], serialize_response(&response)).into_response()
}

async fn oai_get(State(state): State<Arc<AppState>>, RawQuery(raw): RawQuery) -> Response {
    oai_response(&state, &api::query_pairs(raw.as_deref()))
}

async fn oai_post(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let pairs: Vec<(String, String)> = url::form_urlencoded::parse(&body).into_owned().collect();
    oai_response(&state, &pairs)
}

async fn log_request(request: Request<Body>, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let started = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        target: "metaharvest::request",
        method = %method,
        path = %path,
        status = response.status().as_u16(),
        elapsed_ms = started.elapsed().as_secs_f64() * 1000.0,
    );
    response
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new().allow_origin(Any).allow_methods([Method::GET]);
    Router::new()
        .route("/api/search", get(api::search))
        .route("/api/records/{*id}", get(api::record))
        .route("/rss", get(feeds::rss))
        .route("/opensearch.xml", get(feeds::opensearch))
        .route("/oai", get(oai_get).post(oai_post))
        .route("/healthz", get(api::healthz))
        .layer(cors)
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

/// A bound, not yet running service.
pub struct Service {
    state: Arc<AppState>,
    listener: TcpListener,
}

impl Service {
    pub async fn bind(config: ServiceConfig) -> Result<Self, ServeError> {
        let addr = config.bind;
        let state = Arc::new(AppState::open(config)?);
        Self::bind_state(state, addr).await
    }

    pub async fn bind_state(state: Arc<AppState>, addr: SocketAddr) -> Result<Self, ServeError> {
        let listener = TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })?;
        Ok(Service { state, listener })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    /// Serves until `shutdown` resolves, then lets in-flight requests and
    /// harvests finish and compacts the record store.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        let (stop_tx, stop_rx) = watch::channel(false);
        let scheduler = tokio::spawn(schedule_loop(
            Arc::clone(&self.state.harvester),
            self.state.config.sources.clone(),
            stop_rx,
            None,
        ));
        tracing::info!(addr = %self.listener.local_addr()?, "listening");
        let served = axum::serve(self.listener, router(Arc::clone(&self.state))).with_graceful_shutdown(shutdown).await;
        let _ = stop_tx.send(true);
        if let Err(e) = scheduler.await {
            tracing::error!(error = %e, "scheduler task failed");
        }
        self.state.catalog.sync()?;
        self.state.catalog.compact()?;
        served?;
        Ok(())
    }
}
