use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ior_core::domain::GraphError;
use ior_core::scheduler::SchedulerError;
use ior_core::scoring::ScoreError;
use ior_core::store::StoreError;
use ior_core::system::SystemError;
use ior_core::telemetry::TelemetryError;
use serde::Serialize;
use serde_json::{json, Value};

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn with(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

use StatusCode as S;

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        let message = e.to_string();
        let err = |status, code| ApiError::new(status, code, message.clone());
        match &e {
            GraphError::UnknownParent(id) => err(S::NOT_FOUND, "unknown_parent").with(json!({ "id": id })),
            GraphError::DuplicateId(id) => err(S::CONFLICT, "duplicate_id").with(json!({ "id": id })),
            GraphError::InvalidSpec { field, reason } => {
                err(S::UNPROCESSABLE_ENTITY, "invalid_spec").with(json!({ "field": field, "reason": reason }))
            }
            GraphError::UnknownEntity(id) => err(S::NOT_FOUND, "unknown_entity").with(json!({ "id": id })),
            GraphError::UnknownList(id) => err(S::NOT_FOUND, "unknown_list").with(json!({ "id": id })),
            GraphError::NonPositiveWeight { list_id } => {
                err(S::UNPROCESSABLE_ENTITY, "non_positive_weight").with(json!({ "list_id": list_id }))
            }
            GraphError::UnknownTemplate(id) => err(S::NOT_FOUND, "unknown_template").with(json!({ "id": id })),
            GraphError::CategoryMismatch { template, enterprise } => {
                err(S::CONFLICT, "category_mismatch").with(json!({ "template": template, "enterprise": enterprise }))
            }
            GraphError::HasChildren(id) => err(S::CONFLICT, "has_children").with(json!({ "id": id })),
            GraphError::HasDependents { id, by } => {
                err(S::CONFLICT, "has_dependents").with(json!({ "id": id, "by": by }))
            }
        }
    }
}

impl From<ScoreError> for ApiError {
    fn from(e: ScoreError) -> Self {
        let message = e.to_string();
        let err = |status, code| ApiError::new(status, code, message.clone());
        match &e {
            ScoreError::UnknownItem(id) => err(S::NOT_FOUND, "unknown_item").with(json!({ "id": id })),
            ScoreError::UnknownList(id) => err(S::NOT_FOUND, "unknown_list").with(json!({ "id": id })),
            ScoreError::UnknownEntity(id) => err(S::NOT_FOUND, "unknown_entity").with(json!({ "id": id })),
            ScoreError::UnknownEnterprise(id) => err(S::NOT_FOUND, "unknown_enterprise").with(json!({ "id": id })),
            ScoreError::EmptyChildren(id) => err(S::CONFLICT, "empty_children").with(json!({ "id": id })),
            ScoreError::InvalidEvent(_) => err(S::UNPROCESSABLE_ENTITY, "invalid_event"),
            ScoreError::LateEvent { event_id, date } => {
                err(S::CONFLICT, "late_event").with(json!({ "event_id": event_id, "date": date }))
            }
            ScoreError::AlreadyClosed(date) => err(S::CONFLICT, "already_closed").with(json!({ "date": date })),
            ScoreError::MissingSnapshot(date) => err(S::NOT_FOUND, "missing_snapshot").with(json!({ "date": date })),
            ScoreError::InvalidRange { from, to } => {
                err(S::BAD_REQUEST, "invalid_range").with(json!({ "from": from, "to": to }))
            }
            ScoreError::RangeTooLarge(days) => err(S::BAD_REQUEST, "range_too_large").with(json!({ "days": days })),
            ScoreError::UnknownSubject { level, id, date } => {
                err(S::NOT_FOUND, "unknown_subject").with(json!({ "level": level, "id": id, "date": date }))
            }
            ScoreError::OutOfRange(_) => err(S::BAD_REQUEST, "out_of_range"),
            ScoreError::InvalidPolicy(_) => err(S::BAD_REQUEST, "invalid_policy"),
            ScoreError::NoLeader(id) => err(S::CONFLICT, "no_leader").with(json!({ "enterprise_id": id })),
        }
    }
}

impl From<TelemetryError> for ApiError {
    fn from(e: TelemetryError) -> Self {
        let message = e.to_string();
        let err = |status, code| ApiError::new(status, code, message.clone());
        match &e {
            TelemetryError::UnknownTargetItem(id) => err(S::NOT_FOUND, "unknown_target_item").with(json!({ "id": id })),
            TelemetryError::InvalidRule(_) => err(S::UNPROCESSABLE_ENTITY, "invalid_rule"),
            TelemetryError::InvalidReading(_) => err(S::UNPROCESSABLE_ENTITY, "invalid_reading"),
            TelemetryError::UnitMismatch { rule_id, expected, got } => err(S::UNPROCESSABLE_ENTITY, "unit_mismatch")
                .with(json!({ "rule_id": rule_id, "expected": expected, "got": got })),
            TelemetryError::AlreadyAccrued(date) => err(S::CONFLICT, "already_accrued").with(json!({ "date": date })),
        }
    }
}

impl From<SchedulerError> for ApiError {
    fn from(e: SchedulerError) -> Self {
        let message = e.to_string();
        let err = |status, code| ApiError::new(status, code, message.clone());
        match &e {
            SchedulerError::NoPeriodicRule(id) => err(S::CONFLICT, "no_periodic_rule").with(json!({ "id": id })),
            SchedulerError::UnknownItem(id) => err(S::NOT_FOUND, "unknown_item").with(json!({ "id": id })),
            SchedulerError::InvalidHorizon => err(S::BAD_REQUEST, "invalid_horizon"),
            SchedulerError::MisalignedAnchor {
                item_id,
                anchor,
                existing,
            } => err(S::CONFLICT, "misaligned_anchor")
                .with(json!({ "item_id": item_id, "anchor": anchor, "existing": existing })),
            SchedulerError::NotACompletion(id) => {
                err(S::UNPROCESSABLE_ENTITY, "not_a_completion").with(json!({ "id": id }))
            }
            SchedulerError::NoPendingInstance(id) => err(S::CONFLICT, "no_pending_instance").with(json!({ "id": id })),
            SchedulerError::AlreadySwept(date) => err(S::CONFLICT, "already_swept").with(json!({ "date": date })),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        let err = |code| ApiError::new(S::INTERNAL_SERVER_ERROR, code, message.clone());
        match &e {
            StoreError::DataDirLocked(_) => err("data_dir_locked"),
            StoreError::Corrupt { line, .. } => err("corrupt_log").with(json!({ "line": line })),
            StoreError::Io { .. } => err("io_error"),
        }
    }
}

impl From<SystemError> for ApiError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Graph(e) => e.into(),
            SystemError::Score(e) => e.into(),
            SystemError::Telemetry(e) => e.into(),
            SystemError::Scheduler(e) => e.into(),
            SystemError::Store(e) => e.into(),
            SystemError::LateReading { ref reading_id, date } => {
                ApiError::new(S::CONFLICT, "late_reading", e.to_string())
                    .with(json!({ "reading_id": reading_id, "date": date }))
            }
            SystemError::Replay { seq, .. } => {
                ApiError::new(S::INTERNAL_SERVER_ERROR, "replay_failed", e.to_string()).with(json!({ "seq": seq }))
            }
            SystemError::Poisoned => ApiError::new(S::SERVICE_UNAVAILABLE, "writes_disabled", e.to_string()),
        }
    }
}
