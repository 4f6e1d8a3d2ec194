//! HTTP/JSON front end for a responsibility network backed by a data
//! directory. Every response is a pure function of the persisted state and
//! the request, so a restarted service answers byte for byte the same.

mod config;
mod error;
mod routes;

use std::net::SocketAddr;
use std::sync::Arc;

use ior_core::safety_map::Region;
use ior_core::scoring::BandPolicy;
use ior_core::system::System;
use parking_lot::RwLock;

pub use config::{Config, ConfigError};
pub use error::ApiError;
pub use routes::router;

/// Shared service state. Writers take the lock exclusively for one
/// append-and-fold; readers share it.
#[derive(Clone)]
pub struct AppState {
    pub system: Arc<RwLock<System>>,
    pub regions: Arc<Vec<Region>>,
    pub policy: BandPolicy,
}

impl AppState {
    pub fn new(system: System, regions: Vec<Region>, policy: BandPolicy) -> Self {
        AppState {
            system: Arc::new(RwLock::new(system)),
            regions: Arc::new(regions),
            policy,
        }
    }

    /// Opens the configured data directory and loads templates and rules
    /// named by the config.
    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let mut system = System::open(&config.data_dir)?;
        if let Some(templates) = config.load_templates()? {
            config::install_templates(&mut system, templates)?;
        }
        for rule in config.load_rules()? {
            system.register_rule(rule)?;
        }
        Ok(AppState::new(system, config.load_regions()?, config.band_policy))
    }
}

/// Runs the service until ctrl-c.
pub async fn serve(config: Config) -> Result<(), ConfigError> {
    let state = AppState::from_config(&config)?;
    let addr: SocketAddr = config
        .listen_addr
        .parse()
        .map_err(|_| ConfigError::Invalid(format!("listen_addr `{}` is not host:port", config.listen_addr)))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ConfigError::Io {
            path: config.listen_addr.clone().into(),
            source,
        })?;
    tracing::info!(%addr, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| ConfigError::Io {
            path: config.listen_addr.into(),
            source,
        })
}
