//! HTTP API over one dataset and one cohort session.

mod api;
mod config;
mod error;

use std::sync::{Arc, RwLock};

use axum::routing::{get, post};
use axum::Router;
use thiserror::Error;

pub use config::{ConfigError, LlmConfig, ServiceConfig};
pub use error::ApiError;

use crate::cohort::CohortTree;
use crate::dataset::{load_dataset_dir, DatasetError, PatientStore};
use crate::wrangler::LlmProvider;

pub struct AppState {
    pub store: Arc<PatientStore>,
    pub tree: RwLock<CohortTree>,
    pub provider: Arc<dyn LlmProvider>,
    pub config: ServiceConfig,
    /// Held for the duration of one natural-language pipeline.
    nl_gate: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(config: ServiceConfig, store: PatientStore, provider: Box<dyn LlmProvider>) -> Arc<Self> {
        Arc::new(AppState {
            store: Arc::new(store),
            tree: RwLock::new(CohortTree::new()),
            provider: Arc::from(provider),
            config,
            nl_gate: tokio::sync::Mutex::new(()),
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/codebook", get(api::codebook))
        .route("/api/cohorts", get(api::list_cohorts))
        .route("/api/cohorts/nl", post(api::create_nl))
        .route("/api/cohorts/dsl", post(api::create_dsl))
        .route("/api/cohorts/{id}", get(api::get_cohort).delete(api::delete_cohort))
        .route("/api/cohorts/{id}/summary", get(api::summary))
        .route("/api/cohorts/{id}/members", get(api::members))
        .route("/api/cohorts/{id}/matrix", get(api::matrix))
        .route("/api/cohorts/{id}/cycle-distribution", get(api::cycle_distribution))
        .route("/api/cohorts/{id}/inspection", get(api::inspection))
        .route("/api/patients/{uid}/wrap", get(api::wrap))
        .route("/api/patients/{uid}/bars", get(api::bars))
        .route("/api/session/save", post(api::save_session))
        .route("/api/session/load", post(api::load_session))
        .fallback(api::not_found)
        .with_state(state)
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("cannot listen on {address}: {reason}")]
    Bind { address: String, reason: String },
    #[error("server stopped: {0}")]
    Server(String),
}

/// Loads the dataset, builds the provider and serves until the process is
/// stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let store = load_dataset_dir(&config.data_dir)?;
    let provider = config.llm.provider(config.audit_log.as_deref())?;
    let address = config.listen_address.clone();
    tracing::info!(patients = store.len(), mode = provider.mode().as_str(), "dataset loaded");
    let listener = tokio::net::TcpListener::bind(&address)
        .await
        .map_err(|e| ServiceError::Bind { address: address.clone(), reason: e.to_string() })?;
    tracing::info!(%address, "listening");
    axum::serve(listener, router(AppState::new(config, store, provider)))
        .await
        .map_err(|e| ServiceError::Server(e.to_string()))
}
