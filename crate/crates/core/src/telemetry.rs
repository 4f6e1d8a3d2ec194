//! Sensor readings against threshold rules. A breaching reading can
//! deduct from the rule's target item once per breach, once per reading
//! (subject to a cooldown), or once per day while the breach stays active.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock;
use crate::domain::Graph;
use crate::ids::Id;
use crate::scoring::{EventKind, EventSource, ScoreEvent};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    #[default]
    Gt,
    Ge,
    Lt,
    Le,
}

impl Comparator {
    pub fn holds(self, value: f64, critical: f64) -> bool {
        match self {
            Comparator::Gt => value > critical,
            Comparator::Ge => value >= critical,
            Comparator::Lt => value < critical,
            Comparator::Le => value <= critical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeductionMode {
    OncePerBreach,
    PerDayWhileActive,
    PerOccurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub rule_id: Id,
    pub sensor_id: String,
    pub metric: String,
    #[serde(default)]
    pub comparator: Comparator,
    pub critical_value: f64,
    pub unit: String,
    pub deduction_mode: DeductionMode,
    pub penalty_points: f64,
    pub target_item_id: Id,
    #[serde(default)]
    pub cooldown_hours: f64,
}

impl ThresholdRule {
    fn cooldown(&self) -> Duration {
        Duration::milliseconds((self.cooldown_hours * 3_600_000.0).round() as i64)
    }

    fn check(&self) -> Result<(), TelemetryError> {
        let invalid = |why: String| Err(TelemetryError::InvalidRule(format!("{}: {why}", self.rule_id)));
        if self.rule_id.is_empty() {
            return invalid("rule_id must not be empty".into());
        }
        if self.sensor_id.is_empty() || self.metric.is_empty() {
            return invalid("sensor_id and metric are required".into());
        }
        if !(self.penalty_points.is_finite() && self.penalty_points > 0.0 && self.penalty_points <= 100.0) {
            return invalid(format!("penalty_points {} outside (0, 100]", self.penalty_points));
        }
        if !self.critical_value.is_finite() {
            return invalid("critical_value must be finite".into());
        }
        if !(self.cooldown_hours.is_finite() && self.cooldown_hours >= 0.0) {
            return invalid(format!("cooldown_hours {} must be >= 0", self.cooldown_hours));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub reading_id: Id,
    pub sensor_id: String,
    pub metric: String,
    pub value: f64,
    pub unit: String,
    pub timestamp: DateTime<Utc>,
}

/// Breach tracking for one rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreachState {
    pub rule_id: Id,
    pub active: bool,
    pub since: Option<DateTime<Utc>>,
    pub last_fired: Option<DateTime<Utc>>,
    /// Closed breach intervals `[since, until]`; the last may be open.
    #[serde(skip)]
    intervals: Vec<(DateTime<Utc>, Option<DateTime<Utc>>)>,
}

impl BreachState {
    fn new(rule_id: Id) -> Self {
        BreachState {
            rule_id,
            active: false,
            since: None,
            last_fired: None,
            intervals: Vec::new(),
        }
    }

    fn active_during(&self, date: NaiveDate) -> bool {
        let (start, end) = (clock::start_of_day(date), clock::day_after_start(date));
        self.intervals
            .iter()
            .any(|(since, until)| *since < end && until.is_none_or(|u| u >= start))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadingOutcome {
    pub events: Vec<ScoreEvent>,
    pub deduplicated: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TelemetryError {
    #[error("rule target item `{0}` does not exist")]
    UnknownTargetItem(Id),
    #[error("invalid rule {0}")]
    InvalidRule(String),
    #[error("invalid reading {0}")]
    InvalidReading(String),
    #[error("reading unit `{got}` does not match rule `{rule_id}` unit `{expected}`")]
    UnitMismatch { rule_id: Id, expected: String, got: String },
    #[error("breaches for {0} were already accrued")]
    AlreadyAccrued(NaiveDate),
}

#[derive(Debug, Clone, Default)]
pub struct Telemetry {
    rules: BTreeMap<Id, ThresholdRule>,
    states: BTreeMap<Id, BreachState>,
    seen_readings: HashSet<Id>,
    accrued: BTreeSet<NaiveDate>,
}

impl Telemetry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rules(&self) -> impl Iterator<Item = &ThresholdRule> {
        self.rules.values()
    }

    pub fn rule(&self, rule_id: &str) -> Option<&ThresholdRule> {
        self.rules.get(rule_id)
    }

    pub fn breach_state(&self, rule_id: &str) -> Option<&BreachState> {
        self.states.get(rule_id)
    }

    pub fn targets(&self, item_id: &str) -> bool {
        self.rules.values().any(|r| r.target_item_id == item_id)
    }

    pub fn has_reading(&self, reading_id: &str) -> bool {
        self.seen_readings.contains(reading_id)
    }

    /// Day on which the earliest recorded breach began.
    pub fn earliest_breach_day(&self) -> Option<NaiveDate> {
        self.states
            .values()
            .filter_map(|s| s.intervals.first())
            .map(|(since, _)| since.date_naive())
            .min()
    }

    pub fn is_accrued(&self, date: NaiveDate) -> bool {
        self.accrued.contains(&date)
    }

    /// Checks a rule against the graph and the rules already registered.
    pub fn validate_rule(&self, graph: &Graph, rule: &ThresholdRule) -> Result<(), TelemetryError> {
        rule.check()?;
        if graph.item(&rule.target_item_id).is_none() {
            return Err(TelemetryError::UnknownTargetItem(rule.target_item_id.clone()));
        }
        if let Some(other) = self.rules.values().find(|r| {
            r.rule_id != rule.rule_id && r.sensor_id == rule.sensor_id && r.metric == rule.metric && r.unit != rule.unit
        }) {
            return Err(TelemetryError::InvalidRule(format!(
                "{}: unit `{}` conflicts with rule `{}` using `{}` for {}/{}",
                rule.rule_id, rule.unit, other.rule_id, other.unit, rule.sensor_id, rule.metric
            )));
        }
        Ok(())
    }

    /// Stores a rule. An identical re-registration keeps the breach state;
    /// a changed rule replaces the old one and starts from a clear state.
    pub fn register_rule(&mut self, graph: &Graph, rule: ThresholdRule) -> Result<Id, TelemetryError> {
        self.validate_rule(graph, &rule)?;
        let id = rule.rule_id.clone();
        if self.rules.get(&id) == Some(&rule) {
            return Ok(id);
        }
        self.states.insert(id.clone(), BreachState::new(id.clone()));
        self.rules.insert(id.clone(), rule);
        Ok(id)
    }

    /// Unit check for every rule watching this reading's sensor and metric.
    pub fn check_reading(&self, reading: &SensorReading) -> Result<(), TelemetryError> {
        if reading.reading_id.is_empty() {
            return Err(TelemetryError::InvalidReading("reading_id must not be empty".into()));
        }
        if !reading.value.is_finite() {
            return Err(TelemetryError::InvalidReading(format!(
                "{}: value must be finite",
                reading.reading_id
            )));
        }
        for rule in self.candidates(reading) {
            if rule.unit != reading.unit {
                return Err(TelemetryError::UnitMismatch {
                    rule_id: rule.rule_id.clone(),
                    expected: rule.unit.clone(),
                    got: reading.unit.clone(),
                });
            }
        }
        Ok(())
    }

    fn candidates<'a>(&'a self, reading: &'a SensorReading) -> impl Iterator<Item = &'a ThresholdRule> + 'a {
        self.rules
            .values()
            .filter(move |r| r.sensor_id == reading.sensor_id && r.metric == reading.metric)
    }

    /// Evaluates a reading against every matching rule and returns the
    /// deductions it triggers. Readings are processed in arrival order.
    pub fn ingest_reading(&mut self, reading: &SensorReading) -> Result<ReadingOutcome, TelemetryError> {
        if self.seen_readings.contains(&reading.reading_id) {
            return Ok(ReadingOutcome {
                events: Vec::new(),
                deduplicated: true,
            });
        }
        self.check_reading(reading)?;
        let matching: Vec<Id> = self.candidates(reading).map(|r| r.rule_id.clone()).collect();
        let mut events = Vec::new();
        let ts = reading.timestamp;
        for rule_id in matching {
            let rule = &self.rules[&rule_id];
            let state = self.states.get_mut(&rule_id).expect("state per rule");
            let breaching = rule.comparator.holds(reading.value, rule.critical_value);
            let fire = breaching
                && match rule.deduction_mode {
                    DeductionMode::OncePerBreach => !state.active,
                    DeductionMode::PerOccurrence => state.last_fired.is_none_or(|last| ts - last >= rule.cooldown()),
                    DeductionMode::PerDayWhileActive => false,
                };
            if fire {
                state.last_fired = Some(ts);
                events.push(ScoreEvent {
                    event_id: Id::new(format!("tb-{}-{}", rule.rule_id, reading.reading_id)),
                    timestamp: ts,
                    item_id: rule.target_item_id.clone(),
                    kind: EventKind::TelemetryBreach,
                    points: -rule.penalty_points,
                    reason: format!(
                        "rule {}: {} {}{} vs {}",
                        rule.rule_id, rule.metric, reading.value, reading.unit, rule.critical_value
                    ),
                    source: EventSource::Iot,
                });
            }
            if breaching && !state.active {
                state.active = true;
                state.since = Some(ts);
                state.intervals.push((ts, None));
            } else if !breaching && state.active {
                state.active = false;
                if let Some(last) = state.intervals.last_mut() {
                    last.1 = Some(ts);
                }
            }
        }
        self.seen_readings.insert(reading.reading_id.clone());
        Ok(ReadingOutcome {
            events,
            deduplicated: false,
        })
    }

    /// One deduction per per-day rule whose breach was active at any
    /// instant of `date`, stamped at the end of that day.
    pub fn accrue_daily_breaches(&mut self, date: NaiveDate) -> Result<Vec<ScoreEvent>, TelemetryError> {
        if self.accrued.contains(&date) {
            return Err(TelemetryError::AlreadyAccrued(date));
        }
        let events = self
            .rules
            .values()
            .filter(|r| r.deduction_mode == DeductionMode::PerDayWhileActive)
            .filter(|r| self.states.get(&r.rule_id).is_some_and(|s| s.active_during(date)))
            .map(|rule| ScoreEvent {
                event_id: Id::new(format!("tbd-{}-{}", rule.rule_id, date)),
                timestamp: clock::end_of_day(date),
                item_id: rule.target_item_id.clone(),
                kind: EventKind::TelemetryBreach,
                points: -rule.penalty_points,
                reason: format!("rule {}: {} breach active on {}", rule.rule_id, rule.metric, date),
                source: EventSource::Iot,
            })
            .collect();
        self.accrued.insert(date);
        Ok(events)
    }
}
