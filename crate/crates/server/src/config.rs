use std::fs;
use std::path::{Path, PathBuf};

use ior_core::domain::{GraphCommand, TemplateSet};
use ior_core::safety_map::Region;
use ior_core::scoring::BandPolicy;
use ior_core::store::StoreError;
use ior_core::system::{System, SystemError};
use ior_core::telemetry::ThresholdRule;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "IOR_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub data_dir: PathBuf,
    #[serde(default = "default_listen_addr")]
    pub listen_addr: String,
    #[serde(default)]
    pub band_policy: BandPolicy,
    #[serde(default)]
    pub templates_path: Option<PathBuf>,
    #[serde(default)]
    pub rules_path: Option<PathBuf>,
    #[serde(default)]
    pub regions_path: Option<PathBuf>,
}

fn default_listen_addr() -> String {
    "127.0.0.1:8080".into()
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error(transparent)]
    System(#[from] SystemError),
}

impl From<StoreError> for ConfigError {
    fn from(e: StoreError) -> Self {
        ConfigError::System(e.into())
    }
}

impl Config {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Config {
            data_dir: data_dir.into(),
            listen_addr: default_listen_addr(),
            band_policy: BandPolicy::default(),
            templates_path: None,
            rules_path: None,
            regions_path: None,
        }
    }

    /// Reads a JSON config file, then applies `IOR_*` overrides from `env`.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let mut value = match path {
            Some(path) => {
                let text = read(path)?;
                serde_json::from_str::<serde_json::Value>(&text).map_err(|e| ConfigError::File {
                    path: path.to_owned(),
                    message: e.to_string(),
                })?
            }
            None => serde_json::json!({}),
        };
        let object = value
            .as_object_mut()
            .ok_or_else(|| ConfigError::Invalid("config must be a JSON object".into()))?;
        for (key, raw) in env {
            let Some(field) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let field = field.to_ascii_lowercase();
            let parsed = match field.as_str() {
                "data_dir" | "listen_addr" | "templates_path" | "rules_path" | "regions_path" => {
                    serde_json::Value::String(raw)
                }
                "band_policy" => serde_json::from_str(&raw).map_err(|e| ConfigError::Invalid(format!("{key}: {e}")))?,
                _ => continue,
            };
            object.insert(field, parsed);
        }
        let config: Config = serde_json::from_value(value).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.data_dir.as_os_str().is_empty() {
            return Err(ConfigError::Invalid("data_dir is required".into()));
        }
        self.band_policy
            .check()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn load_templates(&self) -> Result<Option<TemplateSet>, ConfigError> {
        let Some(path) = &self.templates_path else {
            return Ok(None);
        };
        let set = TemplateSet::parse(&read(path)?).map_err(|e| ConfigError::File {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok(Some(set))
    }

    pub fn load_rules(&self) -> Result<Vec<ThresholdRule>, ConfigError> {
        self.rules_path.as_deref().map_or(Ok(Vec::new()), parse_file)
    }

    pub fn load_regions(&self) -> Result<Vec<Region>, ConfigError> {
        self.regions_path.as_deref().map_or(Ok(Vec::new()), parse_file)
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    serde_json::from_str(&read(path)?).map_err(|e| ConfigError::File {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Declares the set's categories and stores its templates. Templates that
/// are already present unchanged are skipped.
pub fn install_templates(system: &mut System, set: TemplateSet) -> Result<(), SystemError> {
    let categories: Vec<String> = set.all_categories().into_iter().collect();
    system.apply_graph(GraphCommand::DeclareCategories { categories })?;
    for template in set.templates {
        system.apply_graph(GraphCommand::PutTemplate { template })?;
    }
    Ok(())
}
