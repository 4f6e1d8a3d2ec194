//! Event-sourced scoring: score events fold into per-item monthly scores,
//! which roll up through list and station weights to enterprise means.

mod band;
mod engine;
pub mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::YearMonth;
use crate::ids::Id;

pub use band::{classify_band, Band, BandPolicy};
pub use engine::{aggregate, fold_scores, ApplyOutcome, ScoringEngine};
pub use report::{accountability_report, low_score_reminders, AccountabilityRow, Notification};

/// Score every item starts each month with.
pub const FULL_SCORE: f64 = 100.0;
/// Longest series returned by one request.
pub const MAX_SERIES_POINTS: usize = 366;

pub fn clamp_score(score: f64) -> f64 {
    score.clamp(0.0, FULL_SCORE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Completion,
    ManualDeduction,
    TelemetryBreach,
    OverdueDuty,
    Award,
}

impl EventKind {
    pub fn is_deduction(self) -> bool {
        matches!(
            self,
            EventKind::ManualDeduction | EventKind::TelemetryBreach | EventKind::OverdueDuty
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    Perception,
    Iot,
    Manual,
}

/// One reasoned score change. The ledger is the ordered set of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEvent {
    pub event_id: Id,
    pub timestamp: DateTime<Utc>,
    pub item_id: Id,
    pub kind: EventKind,
    pub points: f64,
    pub reason: String,
    pub source: EventSource,
}

impl ScoreEvent {
    /// Ledger ordering key.
    pub fn key(&self) -> (DateTime<Utc>, Id) {
        (self.timestamp, self.event_id.clone())
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }

    /// Checks that `points` agrees in sign with `kind`.
    pub fn check(&self) -> Result<(), ScoreError> {
        let invalid = |why: &str| Err(ScoreError::InvalidEvent(format!("{}: {why}", self.event_id)));
        if self.event_id.is_empty() {
            return invalid("event_id must not be empty");
        }
        if !self.points.is_finite() {
            return invalid("points must be finite");
        }
        match self.kind {
            EventKind::Completion if self.points != 0.0 => invalid("completion carries 0 points"),
            EventKind::Award if self.points < 0.0 => invalid("award points must be >= 0"),
            kind if kind.is_deduction() && self.points > 0.0 => invalid("deduction points must be <= 0"),
            _ => Ok(()),
        }
    }
}

/// An item's score within one monthly period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreState {
    pub item_id: Id,
    pub period_anchor: YearMonth,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Item,
    List,
    Station,
    Enterprise,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Item => "item",
            Level::List => "list",
            Level::Station => "station",
            Level::Enterprise => "enterprise",
        })
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "item" => Ok(Level::Item),
            "list" => Ok(Level::List),
            "station" => Ok(Level::Station),
            "enterprise" => Ok(Level::Enterprise),
            other => Err(format!("unknown level `{other}`")),
        }
    }
}

/// Scores at every level for one instant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub item_scores: BTreeMap<Id, f64>,
    pub list_scores: BTreeMap<Id, f64>,
    pub station_scores: BTreeMap<Id, f64>,
    pub enterprise_scores: BTreeMap<Id, f64>,
}

impl Scores {
    pub fn level(&self, level: Level) -> &BTreeMap<Id, f64> {
        match level {
            Level::Item => &self.item_scores,
            Level::List => &self.list_scores,
            Level::Station => &self.station_scores,
            Level::Enterprise => &self.enterprise_scores,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reason {
    pub item_id: Id,
    pub points: f64,
    pub reason: String,
}

/// End-of-day record. Written once and never recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySnapshot {
    pub date: NaiveDate,
    #[serde(flatten)]
    pub scores: Scores,
    pub reasons: Vec<Reason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub date: NaiveDate,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("unknown item `{0}`")]
    UnknownItem(Id),
    #[error("unknown list `{0}`")]
    UnknownList(Id),
    #[error("unknown entity `{0}`")]
    UnknownEntity(Id),
    #[error("unknown enterprise `{0}`")]
    UnknownEnterprise(Id),
    #[error("`{0}` has no children to aggregate")]
    EmptyChildren(Id),
    #[error("invalid event {0}")]
    InvalidEvent(String),
    #[error("event `{event_id}` targets {date}, which is already closed")]
    LateEvent { event_id: Id, date: NaiveDate },
    #[error("{0} is already closed")]
    AlreadyClosed(NaiveDate),
    #[error("no snapshot for {0}")]
    MissingSnapshot(NaiveDate),
    #[error("invalid range {from}..{to}")]
    InvalidRange { from: NaiveDate, to: NaiveDate },
    #[error("range of {0} days exceeds the {MAX_SERIES_POINTS}-point cap")]
    RangeTooLarge(usize),
    #[error("{level} `{id}` is not in the snapshot for {date}")]
    UnknownSubject { level: Level, id: Id, date: NaiveDate },
    #[error("score {0} outside [0, 100]")]
    OutOfRange(f64),
    #[error("invalid band policy: {0}")]
    InvalidPolicy(String),
    #[error("enterprise `{0}` has no leader")]
    NoLeader(Id),
}

#[cfg(test)]
mod tests;
