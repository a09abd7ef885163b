#![allow(dead_code)]

pub mod conformance;
pub mod equivalence;
pub mod golden;
pub mod oracle;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use chrono::Utc;
use metaharvest_core::oaipmh::client::{RecordingTransport, Transport, TransportResponse};
use metaharvest_core::oaipmh::{handle_request, serialize_response, RepositoryConfig};
use metaharvest_core::record::MetadataRecord;
use metaharvest_core::store::Catalog;

/// An in-process OAI-PMH provider over its own catalog.
pub struct Provider {
    pub catalog: Arc<Catalog>,
    pub config: RepositoryConfig,
    pub down: AtomicBool,
}

impl Provider {
    pub fn new(records: impl IntoIterator<Item = MetadataRecord>, page_size: usize) -> Self {
        let catalog = Catalog::in_memory();
        catalog.apply_batch(records).unwrap();
        let mut config = RepositoryConfig::new("provider", "http://provider/oai");
        config.page_size = page_size;
        Provider { catalog: Arc::new(catalog), config, down: AtomicBool::new(false) }
    }

    pub fn set_down(&self, down: bool) {
        self.down.store(down, Ordering::SeqCst);
    }
}

#[async_trait]
impl Transport for Provider {
    async fn get(&self, _base_url: &str, params: &[(String, String)]) -> Result<TransportResponse, String> {
        if self.down.load(Ordering::SeqCst) {
            return Err("connection refused".into());
        }
        let resp = handle_request(params, &self.catalog.view(), &self.config, Utc::now());
        Ok(TransportResponse::ok(serialize_response(&resp)))
    }
}

pub fn recording(provider: Provider) -> Arc<RecordingTransport<Provider>> {
    Arc::new(RecordingTransport::new(provider))
}

/// Requests in a wire log with the given verb.
pub fn verbs(log: &[Vec<(String, String)>], verb: &str) -> Vec<Vec<(String, String)>> {
    log.iter().filter(|r| r.iter().any(|(k, v)| k == "verb" && v == verb)).cloned().collect()
}

pub fn param<'a>(request: &'a [(String, String)], name: &str) -> Option<&'a str> {
    request.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
}
