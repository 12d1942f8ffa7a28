use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::Json;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{ApiError, AppState};
use crate::cohort::{group_summary, load_session as load_tree, save_session as save_tree, CohortError};
use crate::dataset::{BpType, Uid};
use crate::dsl::compile;
use crate::vis::{
    build_bars, build_matrix, build_wrap, cycle_distribution as cycle_bins, default_legend, MatrixParams, OutcomeKey,
    SortDirection, SortKey, WrapConfig,
};
use crate::wrangler::{run_pipeline, small_multiples, WranglerRequest};

type Shared = State<Arc<AppState>>;
type Params = Query<HashMap<String, String>>;
type ApiResult = Result<Json<Value>, ApiError>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request("InvalidBody", e.to_string()))
}

fn param<T: FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    params
        .get(key)
        .map(|raw| raw.parse::<T>().map_err(|e| ApiError::bad_request("InvalidParameter", format!("{key}={raw}: {e}"))))
        .transpose()
}

fn to_json(v: impl serde::Serialize) -> ApiResult {
    serde_json::to_value(v).map(Json).map_err(|e| ApiError::internal(e.to_string()))
}

fn read_tree(st: &AppState) -> std::sync::RwLockReadGuard<'_, crate::cohort::CohortTree> {
    st.tree.read().unwrap_or_else(|p| p.into_inner())
}

fn write_tree(st: &AppState) -> std::sync::RwLockWriteGuard<'_, crate::cohort::CohortTree> {
    st.tree.write().unwrap_or_else(|p| p.into_inner())
}

fn member_set(st: &AppState, id: &str) -> Result<BTreeSet<Uid>, ApiError> {
    Ok(read_tree(st).node(id)?.member_uids.clone())
}

pub async fn not_found() -> ApiError {
    ApiError::not_found("NotFound", "no such endpoint")
}

pub async fn codebook(State(st): Shared) -> ApiResult {
    to_json(st.store.codebook())
}

pub async fn list_cohorts(State(st): Shared) -> ApiResult {
    Ok(Json(json!({ "nodes": read_tree(&st).view() })))
}

pub async fn get_cohort(State(st): Shared, Path(id): Path<String>) -> ApiResult {
    to_json(read_tree(&st).node(&id)?)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct NlBody {
    text: String,
    parent_id: Option<String>,
    name: Option<String>,
}

pub async fn create_nl(State(st): Shared, bytes: Bytes) -> ApiResult {
    let req: NlBody = body(&bytes)?;
    if let Some(p) = &req.parent_id {
        read_tree(&st).node(p).map_err(|_| CohortError::UnknownParent { id: p.clone() })?;
    }
    let _busy = st.nl_gate.try_lock().map_err(|_| {
        ApiError::new(StatusCode::TOO_MANY_REQUESTS, "Busy", "a natural-language query is already running")
    })?;
    let worker = Arc::clone(&st);
    let text = req.text.clone();
    let parent = req.parent_id.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let mut request = WranglerRequest::new(text, worker.store.codebook());
        request.parent_cohort_id = parent;
        request.max_repair_rounds = worker.config.llm.max_repair_rounds;
        request.temperature = worker.config.llm.temperature;
        run_pipeline(&request, worker.provider.as_ref())
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    let (query, trace) = outcome?;
    let added = write_tree(&st).add_cohort(
        req.name.as_deref(),
        query,
        Some(trace.clone()),
        req.parent_id.as_deref(),
        &st.store,
    )?;
    Ok(Json(json!({ "cohort": added.node, "trace": trace, "warning": added.warning })))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct DslBody {
    query_text: String,
    parent_id: Option<String>,
    name: Option<String>,
}

pub async fn create_dsl(State(st): Shared, bytes: Bytes) -> ApiResult {
    let req: DslBody = body(&bytes)?;
    let query = compile(&req.query_text, st.store.codebook())?;
    let added = write_tree(&st).add_cohort(req.name.as_deref(), query, None, req.parent_id.as_deref(), &st.store)?;
    Ok(Json(json!({ "cohort": added.node, "warning": added.warning })))
}

pub async fn delete_cohort(State(st): Shared, Path(id): Path<String>) -> ApiResult {
    let removed = write_tree(&st).remove_cohort(&id)?;
    Ok(Json(json!({ "removed": removed })))
}

pub async fn summary(State(st): Shared, Path(id): Path<String>) -> ApiResult {
    to_json(group_summary(&read_tree(&st), &id, &st.store)?)
}

pub async fn members(State(st): Shared, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    let key: SortKey = param(&q, "sortKey")?.unwrap_or_else(|| SortKey::field("age"));
    let dir: SortDirection = param(&q, "direction")?.unwrap_or_default();
    let uids = read_tree(&st).sort_members(&id, &st.store, &key, dir)?;
    Ok(Json(json!({ "cohortId": id, "sortKey": key.to_string(), "uids": uids })))
}

pub async fn matrix(State(st): Shared, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    let uids = member_set(&st, &id)?;
    let defaults = &st.config.defaults;
    let mut cfg = defaults.clone();
    if let Some(bp) = param::<BpType>(&q, "bpType")? {
        if bp != defaults.bp_type {
            cfg.category_legend = default_legend(bp);
        }
        cfg.bp_type = bp;
    }
    if let Some(c) = param(&q, "cycleHours")? {
        cfg.cycle_hours = c;
    }
    let sort_key = match param::<SortKey>(&q, "sortKey")? {
        Some(k) => k,
        None => SortKey::WindowMean { bp_type: cfg.bp_type, window: 0, cycle_hours: cfg.cycle_hours },
    };
    let cycle_filter = match (param::<f64>(&q, "cycleLo")?, param::<f64>(&q, "cycleHi")?) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => return Err(ApiError::bad_request("InvalidParameter", "cycleLo and cycleHi go together")),
    };
    let params = MatrixParams {
        sort_key,
        direction: param(&q, "direction")?.unwrap_or(SortDirection::Descending),
        outcome_key: param::<OutcomeKey>(&q, "outcomeKey")?.unwrap_or_default(),
        cycle_filter,
    };
    to_json(build_matrix(&st.store, &uids, &cfg, &params)?)
}

pub async fn cycle_distribution(State(st): Shared, Path(id): Path<String>, Query(q): Params) -> ApiResult {
    let uids = member_set(&st, &id)?;
    let bins = param(&q, "bins")?.unwrap_or(24);
    let cycle = param(&q, "cycleHours")?.unwrap_or(st.config.defaults.cycle_hours);
    let out = cycle_bins(&st.store, &uids, cycle, bins)?;
    Ok(Json(json!({ "cohortId": id, "cycleHours": cycle, "bins": out })))
}

pub async fn inspection(State(st): Shared, Path(id): Path<String>) -> ApiResult {
    let tree = read_tree(&st);
    let node = tree.node(&id)?;
    let parent_uids: BTreeSet<Uid> = match &node.parent_id {
        Some(p) => tree.node(p)?.member_uids.clone(),
        None => st.store.uids().iter().cloned().collect(),
    };
    let specs = small_multiples(&node.query, &parent_uids, &node.member_uids, &st.store);
    Ok(Json(json!({
        "cohortId": id,
        "queryText": node.query_text,
        "trace": node.trace,
        "smallMultiples": specs,
    })))
}

pub async fn wrap(State(st): Shared, Path(uid): Path<String>, Query(q): Params) -> ApiResult {
    let mut cfg = WrapConfig { cycle_hours: st.config.defaults.cycle_hours, ..WrapConfig::default() };
    if let Some(c) = param(&q, "cycleHours")? {
        cfg.cycle_hours = c;
    }
    if let Some(b) = param(&q, "baseline")? {
        cfg.baseline = b;
    }
    if let Some(bp) = param(&q, "bpType")? {
        cfg.bp_type = bp;
    }
    if let Some(n) = param(&q, "samplesPerSpan")? {
        cfg.samples_per_span = n;
    }
    to_json(build_wrap(&st.store, &uid, &cfg)?)
}

pub async fn bars(State(st): Shared, Path(uid): Path<String>, Query(q): Params) -> ApiResult {
    let bp = param(&q, "bpType")?.unwrap_or(BpType::Sbp);
    let low = param(&q, "baselineLow")?.unwrap_or(120.0);
    let high = param(&q, "baselineHigh")?;
    to_json(build_bars(&st.store, &uid, bp, low, high)?)
}

#[derive(Deserialize, Default)]
struct SessionBody {
    name: Option<String>,
}

fn session_path(st: &AppState, bytes: &Bytes) -> Result<PathBuf, ApiError> {
    let req: SessionBody = if bytes.is_empty() { SessionBody::default() } else { body(bytes)? };
    let name = req.name.unwrap_or_else(|| "session".into());
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(ApiError::bad_request("InvalidParameter", "session names use letters, digits, - and _"));
    }
    Ok(st.config.session_dir.join(format!("{name}.jsonl")))
}

pub async fn save_session(State(st): Shared, bytes: Bytes) -> ApiResult {
    let path = session_path(&st, &bytes)?;
    let tree = read_tree(&st);
    save_tree(&tree, &path)?;
    Ok(Json(json!({ "path": path, "records": tree.log().len(), "cohorts": tree.len() })))
}

pub async fn load_session(State(st): Shared, bytes: Bytes) -> ApiResult {
    let path = session_path(&st, &bytes)?;
    if !path.exists() {
        return Err(ApiError::not_found("UnknownSession", format!("no saved session at {}", path.display())));
    }
    let loaded = load_tree(&path, &st.store)?;
    let view = loaded.view();
    *write_tree(&st) = loaded;
    Ok(Json(json!({ "path": path, "nodes": view })))
}
