use std::collections::BTreeMap;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use ior_core::domain::{EntitySpec, GraphCommand, Template};
use ior_core::scheduler::{DutyInstance, DutyStatus};
use ior_core::scoring::{BandPolicy, Level, ScoreEvent, SeriesPoint};
use ior_core::telemetry::{SensorReading, ThresholdRule};
use ior_core::Id;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::AppState;

type ApiResult = Result<Json<Value>, ApiError>;
type Params = Result<Query<BTreeMap<String, String>>, QueryRejection>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/graph", get(graph))
        .route("/graph/violations", get(violations))
        .route("/graph/categories", post(declare_categories))
        .route("/graph/entities", post(add_entity))
        .route("/graph/templates", post(put_template))
        .route("/graph/derive", post(derive_lists))
        .route("/graph/remove", post(remove_entity))
        .route("/events", post(submit_event))
        .route("/readings", post(ingest_reading))
        .route("/rules", get(rules).post(register_rule))
        .route("/duties", get(duties))
        .route("/duties/generate", post(generate_duties))
        .route("/admin/close-day", post(close_day))
        .route("/scores/:level/:id", get(scores))
        .route("/snapshots/:date", get(snapshot))
        .route("/reminders", get(reminders))
        .route("/accountability/:enterprise_id", get(accountability))
        .route("/safety-map", get(safety_map))
        .fallback(|| async { ApiError::new(axum::http::StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

fn body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v)
        .map_err(|e| ApiError::new(e.status(), "invalid_body", e.body_text()))
}

fn params(query: Params) -> Result<BTreeMap<String, String>, ApiError> {
    query
        .map(|Query(q)| q)
        .map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))
}

fn path<T>(path: Result<Path<T>, PathRejection>) -> Result<T, ApiError> {
    path.map(|Path(p)| p)
        .map_err(|e| ApiError::bad_request("invalid_path", e.body_text()))
}

fn parse_date(name: &str, raw: &str) -> Result<NaiveDate, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_request("invalid_date", format!("{name} `{raw}` is not YYYY-MM-DD")))
}

fn to_json<T: Serialize>(value: T) -> ApiResult {
    Ok(Json(serde_json::to_value(value).expect("responses serialize")))
}

/// The configured policy with any `green_min`, `yellow_min` or
/// `reminder_threshold` query overrides applied.
fn policy(state: &AppState, q: &BTreeMap<String, String>) -> Result<BandPolicy, ApiError> {
    let mut policy = state.policy;
    for (name, slot) in [
        ("green_min", &mut policy.green_min),
        ("yellow_min", &mut policy.yellow_min),
        ("reminder_threshold", &mut policy.reminder_threshold),
    ] {
        if let Some(raw) = q.get(name) {
            *slot = raw
                .parse()
                .map_err(|_| ApiError::bad_request("invalid_policy", format!("{name} `{raw}` is not a number")))?;
        }
    }
    policy.check()?;
    Ok(policy)
}

/// `date` from the query, defaulting to the last closed day.
fn report_date(state: &AppState, q: &BTreeMap<String, String>) -> Result<NaiveDate, ApiError> {
    match q.get("date") {
        Some(raw) => parse_date("date", raw),
        None => state
            .system
            .read()
            .engine()
            .last_closed()
            .ok_or_else(|| ApiError::bad_request("missing_date", "no date given and no day has been closed")),
    }
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn graph(State(state): State<AppState>) -> ApiResult {
    to_json(state.system.read().graph())
}

async fn violations(State(state): State<AppState>) -> ApiResult {
    to_json(state.system.read().graph().validate())
}

fn apply(state: &AppState, command: GraphCommand) -> ApiResult {
    let ids = state.system.write().apply_graph(command)?;
    Ok(Json(json!({ "ids": ids })))
}

#[derive(Deserialize)]
struct CategoriesBody {
    categories: Vec<String>,
}

async fn declare_categories(
    State(state): State<AppState>,
    b: Result<Json<CategoriesBody>, JsonRejection>,
) -> ApiResult {
    let CategoriesBody { categories } = body(b)?;
    apply(&state, GraphCommand::DeclareCategories { categories })
}

#[derive(Deserialize)]
struct EntityBody {
    #[serde(default)]
    parent_id: Option<Id>,
    spec: EntitySpec,
}

async fn add_entity(State(state): State<AppState>, b: Result<Json<EntityBody>, JsonRejection>) -> ApiResult {
    let EntityBody { parent_id, spec } = body(b)?;
    apply(&state, GraphCommand::AddEntity { parent_id, spec })
}

async fn put_template(State(state): State<AppState>, b: Result<Json<Template>, JsonRejection>) -> ApiResult {
    apply(&state, GraphCommand::PutTemplate { template: body(b)? })
}

#[derive(Deserialize)]
struct DeriveBody {
    station_id: Id,
    template_id: Id,
}

async fn derive_lists(State(state): State<AppState>, b: Result<Json<DeriveBody>, JsonRejection>) -> ApiResult {
    let DeriveBody {
        station_id,
        template_id,
    } = body(b)?;
    apply(
        &state,
        GraphCommand::DeriveLists {
            station_id,
            template_id,
        },
    )
}

#[derive(Deserialize)]
struct RemoveBody {
    id: Id,
}

async fn remove_entity(State(state): State<AppState>, b: Result<Json<RemoveBody>, JsonRejection>) -> ApiResult {
    let RemoveBody { id } = body(b)?;
    apply(&state, GraphCommand::RemoveEntity { id })
}

async fn submit_event(State(state): State<AppState>, b: Result<Json<ScoreEvent>, JsonRejection>) -> ApiResult {
    let event = body(b)?;
    let receipt = state.system.write().submit_event(event)?;
    to_json(receipt)
}

async fn ingest_reading(State(state): State<AppState>, b: Result<Json<SensorReading>, JsonRejection>) -> ApiResult {
    let reading = body(b)?;
    let receipt = state.system.write().ingest_reading(reading)?;
    to_json(receipt)
}

async fn register_rule(State(state): State<AppState>, b: Result<Json<ThresholdRule>, JsonRejection>) -> ApiResult {
    let rule = body(b)?;
    let rule_id = state.system.write().register_rule(rule)?;
    Ok(Json(json!({ "rule_id": rule_id })))
}

async fn rules(State(state): State<AppState>) -> ApiResult {
    let system = state.system.read();
    let telemetry = system.telemetry();
    let rules: Vec<Value> = telemetry
        .rules()
        .map(|r| json!({ "rule": r, "state": telemetry.breach_state(&r.rule_id) }))
        .collect();
    to_json(rules)
}

#[derive(Deserialize)]
struct GenerateBody {
    item_id: Id,
    anchor: NaiveDate,
    horizon_days: u32,
}

async fn generate_duties(State(state): State<AppState>, b: Result<Json<GenerateBody>, JsonRejection>) -> ApiResult {
    let GenerateBody {
        item_id,
        anchor,
        horizon_days,
    } = body(b)?;
    let instances = state.system.write().generate_duties(&item_id, anchor, horizon_days)?;
    to_json(instances)
}

/// Duty instances, optionally narrowed by `item_id`, `personnel_id`
/// (duties of the stations that person holds) and `status`.
async fn duties(State(state): State<AppState>, q: Params) -> ApiResult {
    let q = params(q)?;
    let status: Option<DutyStatus> = q
        .get("status")
        .map(|s| serde_json::from_value(json!(s)))
        .transpose()
        .map_err(|_| ApiError::bad_request("invalid_query", "status must be pending, completed or overdue"))?;
    let system = state.system.read();
    let graph = system.graph();
    let held_by = |instance: &DutyInstance, person: &str| {
        graph
            .station_of_item(&instance.item_id)
            .is_some_and(|s| s.personnel_id == person)
    };
    let out: Vec<&DutyInstance> = system
        .scheduler()
        .instances()
        .filter(|i| q.get("item_id").is_none_or(|id| i.item_id == id.as_str()))
        .filter(|i| q.get("personnel_id").is_none_or(|p| held_by(i, p)))
        .filter(|i| status.is_none_or(|s| i.status == s))
        .collect();
    to_json(out)
}

#[derive(Deserialize)]
struct CloseBody {
    date: NaiveDate,
}

async fn close_day(State(state): State<AppState>, b: Result<Json<CloseBody>, JsonRejection>) -> ApiResult {
    let CloseBody { date } = body(b)?;
    let report = state.system.write().close_day(date)?;
    to_json(report)
}

#[derive(Serialize)]
struct Live {
    as_of: Option<NaiveDate>,
    score: Option<f64>,
}

/// Closed-day series for one subject plus its live score. Without `from`
/// and `to` the series covers every closed day, capped at the latest 366.
async fn scores(
    State(state): State<AppState>,
    p: Result<Path<(String, String)>, PathRejection>,
    q: Params,
) -> ApiResult {
    let (level, id) = path(p)?;
    let level: Level = level
        .parse()
        .map_err(|e: String| ApiError::bad_request("invalid_level", e))?;
    let q = params(q)?;
    let system = state.system.read();
    let engine = system.engine();
    let graph = system.graph();
    let known = match level {
        Level::Item => graph.item(&id).is_some(),
        Level::List => graph.list(&id).is_some(),
        Level::Station => graph.station(&id).is_some(),
        Level::Enterprise => graph.enterprise(&id).is_some(),
    };
    if !known {
        return Err(ApiError::new(
            axum::http::StatusCode::NOT_FOUND,
            "unknown_entity",
            format!("unknown {level} `{id}`"),
        ));
    }
    let points: Vec<SeriesPoint> = match (q.get("from"), q.get("to")) {
        (Some(from), Some(to)) => system.score_series(level, &id, parse_date("from", from)?, parse_date("to", to)?)?,
        (None, None) => {
            let closed: Vec<_> = engine.snapshots().collect();
            let skip = closed.len().saturating_sub(ior_core::scoring::MAX_SERIES_POINTS);
            closed[skip..]
                .iter()
                .filter_map(|s| {
                    s.scores.level(level).get(id.as_str()).map(|score| SeriesPoint {
                        date: s.date,
                        score: *score,
                    })
                })
                .collect()
        }
        _ => {
            return Err(ApiError::bad_request(
                "invalid_range",
                "give both from and to, or neither",
            ))
        }
    };
    let as_of = system.current_day();
    let live = system.scores_for(as_of.unwrap_or_default());
    to_json(json!({
        "level": level,
        "id": id,
        "points": points,
        "live": Live { as_of, score: live.level(level).get(id.as_str()).copied() },
    }))
}

async fn snapshot(State(state): State<AppState>, p: Result<Path<String>, PathRejection>) -> ApiResult {
    let date = parse_date("date", &path(p)?)?;
    let system = state.system.read();
    let snapshot = system
        .engine()
        .snapshot(date)
        .ok_or(ior_core::scoring::ScoreError::MissingSnapshot(date))?;
    to_json(snapshot)
}

async fn reminders(State(state): State<AppState>, q: Params) -> ApiResult {
    let q = params(q)?;
    let (policy, date) = (policy(&state, &q)?, report_date(&state, &q)?);
    let out = state.system.read().reminders(date, &policy)?;
    to_json(out)
}

async fn accountability(State(state): State<AppState>, p: Result<Path<String>, PathRejection>, q: Params) -> ApiResult {
    let enterprise_id = path(p)?;
    let q = params(q)?;
    let (policy, date) = (policy(&state, &q)?, report_date(&state, &q)?);
    let rows = state.system.read().accountability(&enterprise_id, date, &policy)?;
    to_json(rows)
}

async fn safety_map(State(state): State<AppState>, q: Params) -> ApiResult {
    let q = params(q)?;
    let (policy, date) = (policy(&state, &q)?, report_date(&state, &q)?);
    let cells = state.system.read().safety_map(date, &state.regions, &policy)?;
    to_json(cells)
}
