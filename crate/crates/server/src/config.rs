//! Service configuration, read from a TOML file.

use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use metaharvest_core::harvester::{validate_sources, ConfigError, SourceDescriptor};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable naming the config file when none is given.
pub const CONFIG_ENV: &str = "METAHARVEST_CONFIG";

const SHORT_NAME_MAX: usize = 16;

#[derive(Debug, Error)]
pub enum ServiceConfigError {
    #[error("no config file given and {CONFIG_ENV} is not set")]
    NoConfig,
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("base_url {0:?} is not an absolute http(s) URL")]
    BaseUrl(String),
    #[error("opensearch short_name {0:?} exceeds {SHORT_NAME_MAX} characters")]
    ShortName(String),
    #[error("{what} must be between 1 and {max}")]
    PageSize { what: &'static str, max: usize },
    #[error(transparent)]
    Source(#[from] ConfigError),
}

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_page_size() -> usize {
    10
}

fn default_oai_page_size() -> usize {
    100
}

fn default_timeout() -> Duration {
    Duration::from_secs(30)
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_secs())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Record store directory; also holds its compacted snapshot.
    pub store: PathBuf,
    /// Harvest state files, the audit log and the resumption token key.
    pub state: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: SocketAddr,
    pub repository_name: String,
    /// Public URL of the service; the OAI-PMH base URL is `{base_url}/oai`.
    pub base_url: String,
    /// OpenSearch ShortName; defaults to the repository name.
    #[serde(default)]
    pub short_name: Option<String>,
    #[serde(default)]
    pub admin_email: Option<String>,
    /// Default `size` for `/api/search`.
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    #[serde(default = "default_oai_page_size")]
    pub oai_page_size: usize,
    /// Per-request timeout for harvesting over HTTP, in seconds.
    #[serde(default = "default_timeout", with = "secs")]
    pub harvest_timeout: Duration,
    pub paths: Paths,
    #[serde(default)]
    pub sources: Vec<SourceDescriptor>,
}

impl ServiceConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(repository_name: impl Into<String>, base_url: impl Into<String>, data_dir: &Path) -> Self {
        ServiceConfig {
            bind: default_bind(),
            repository_name: repository_name.into(),
            base_url: base_url.into(),
            short_name: None,
            admin_email: None,
            page_size: default_page_size(),
            oai_page_size: default_oai_page_size(),
            harvest_timeout: default_timeout(),
            paths: Paths { store: data_dir.join("store"), state: data_dir.join("state") },
            sources: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ServiceConfigError> {
        let config: ServiceConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Loads `path`, or the file named by [`CONFIG_ENV`] when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceConfigError> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None => std::env::var_os(CONFIG_ENV).map(PathBuf::from).ok_or(ServiceConfigError::NoConfig)?,
        };
        let text = fs::read_to_string(&path).map_err(|source| ServiceConfigError::Read { path: path.clone(), source })?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.paths.store, &mut config.paths.state] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ServiceConfigError> {
        match url::Url::parse(&self.base_url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.has_host() => {}
            _ => return Err(ServiceConfigError::BaseUrl(self.base_url.clone())),
        }
        if let Some(name) = &self.short_name {
            if name.chars().count() > SHORT_NAME_MAX {
                return Err(ServiceConfigError::ShortName(name.clone()));
            }
        }
        if !(1..=100).contains(&self.page_size) {
            return Err(ServiceConfigError::PageSize { what: "page_size", max: 100 });
        }
        if !(1..=10_000).contains(&self.oai_page_size) {
            return Err(ServiceConfigError::PageSize { what: "oai_page_size", max: 10_000 });
        }
        validate_sources(&self.sources)?;
        Ok(())
    }

    pub fn base_url(&self) -> &str {
        self.base_url.trim_end_matches('/')
    }

    pub fn oai_base_url(&self) -> String {
        format!("{}/oai", self.base_url())
    }

    /// The configured ShortName, or the repository name cut to fit.
    pub fn short_name(&self) -> String {
        match &self.short_name {
            Some(s) => s.clone(),
            None => self.repository_name.chars().take(SHORT_NAME_MAX).collect(),
        }
    }
}

/// Reads the resumption token key from the state directory, creating it on
/// first use so tokens stay valid across restarts.
pub fn token_secret(state_dir: &Path) -> io::Result<Vec<u8>> {
    let path = state_dir.join("oai-token.key");
    match fs::read(&path) {
        Ok(key) if key.len() >= 16 => return Ok(key),
        Ok(_) => {}
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(e) => return Err(e),
    }
    fs::create_dir_all(state_dir)?;
    let mut key = vec![0u8; 32];
    rand::rng().fill_bytes(&mut key);
    fs::write(&path, &key)?;
    Ok(key)
}
