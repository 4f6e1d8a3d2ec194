//! Duty instances for periodic items: generation over a horizon, matching
//! completions, and the overdue sweep. Every operation takes its date from
//! the caller; nothing here reads the wall clock.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock;
use crate::domain::{Graph, ScoreMethod};
use crate::ids::Id;
use crate::scoring::{EventKind, EventSource, ScoreEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DutyStatus {
    Pending,
    Completed,
    Overdue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutyInstance {
    pub instance_id: Id,
    pub item_id: Id,
    pub due_date: NaiveDate,
    pub grace_days: u32,
    pub status: DutyStatus,
    pub completed_by: Option<Id>,
    /// Last day a per-day penalty has been charged for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charged_through: Option<NaiveDate>,
}

impl DutyInstance {
    /// Last day on which a completion still counts.
    pub fn deadline(&self) -> NaiveDate {
        clock::add_days(self.due_date, self.grace_days.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    #[error("item `{0}` has no periodic rule")]
    NoPeriodicRule(Id),
    #[error("unknown item `{0}`")]
    UnknownItem(Id),
    #[error("horizon must be at least one day")]
    InvalidHorizon,
    #[error("anchor {anchor} is not aligned with the existing schedule of `{item_id}` anchored at {existing}")]
    MisalignedAnchor {
        item_id: Id,
        anchor: NaiveDate,
        existing: NaiveDate,
    },
    #[error("event `{0}` is not a completion")]
    NotACompletion(Id),
    #[error("no pending duty of `{0}` accepts this completion")]
    NoPendingInstance(Id),
    #[error("sweep for {0} already ran")]
    AlreadySwept(NaiveDate),
}

#[derive(Debug, Clone, Default)]
pub struct Scheduler {
    by_item: BTreeMap<Id, BTreeMap<NaiveDate, DutyInstance>>,
    anchors: BTreeMap<Id, NaiveDate>,
    last_swept: Option<NaiveDate>,
}

impl Scheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_swept(&self) -> Option<NaiveDate> {
        self.last_swept
    }

    pub fn anchor(&self, item_id: &str) -> Option<NaiveDate> {
        self.anchors.get(item_id).copied()
    }

    pub fn anchors(&self) -> impl Iterator<Item = (&Id, &NaiveDate)> {
        self.anchors.iter()
    }

    pub fn has_instances(&self, item_id: &str) -> bool {
        self.by_item.get(item_id).is_some_and(|m| !m.is_empty())
    }

    pub fn instances(&self) -> impl Iterator<Item = &DutyInstance> {
        self.by_item.values().flat_map(|m| m.values())
    }

    pub fn instances_of(&self, item_id: &str) -> impl Iterator<Item = &DutyInstance> {
        self.by_item.get(item_id).into_iter().flat_map(|m| m.values())
    }

    /// Creates pending duties due `anchor + k·cycle` for `k = 1..=horizon/cycle`.
    /// Existing instances are kept as they are. Duties whose grace period
    /// already ended at the last sweep are not created.
    pub fn generate_instances(
        &mut self,
        graph: &Graph,
        item_id: &str,
        anchor: NaiveDate,
        horizon_days: u32,
    ) -> Result<Vec<DutyInstance>, SchedulerError> {
        let item = graph
            .item(item_id)
            .ok_or_else(|| SchedulerError::UnknownItem(item_id.into()))?;
        let rule = item
            .periodic_rule
            .ok_or_else(|| SchedulerError::NoPeriodicRule(item_id.into()))?;
        if horizon_days == 0 {
            return Err(SchedulerError::InvalidHorizon);
        }
        let cycle = i64::from(rule.cycle_days);
        if let Some(existing) = self.anchors.get(item_id) {
            if (anchor - *existing).num_days().rem_euclid(cycle) != 0 {
                return Err(SchedulerError::MisalignedAnchor {
                    item_id: item_id.into(),
                    anchor,
                    existing: *existing,
                });
            }
        } else {
            self.anchors.insert(item_id.into(), anchor);
        }
        let slots = horizon_days / rule.cycle_days;
        let instances = self.by_item.entry(item_id.into()).or_default();
        let mut out = Vec::with_capacity(slots as usize);
        for k in 1..=slots {
            let due_date = clock::add_days(anchor, u64::from(k) * u64::from(rule.cycle_days));
            if let Some(existing) = instances.get(&due_date) {
                out.push(existing.clone());
                continue;
            }
            let instance = DutyInstance {
                instance_id: Id::new(format!("{item_id}@{due_date}")),
                item_id: item_id.into(),
                due_date,
                grace_days: rule.grace_days,
                status: DutyStatus::Pending,
                completed_by: None,
                charged_through: None,
            };
            if self.last_swept.is_some_and(|swept| instance.deadline() < swept) {
                continue;
            }
            instances.insert(due_date, instance.clone());
            out.push(instance);
        }
        Ok(out)
    }

    /// Discharges the earliest pending duty whose deadline is not before the
    /// completion date.
    pub fn mark_completed(&mut self, item_id: &str, completion: &ScoreEvent) -> Result<DutyInstance, SchedulerError> {
        if completion.kind != EventKind::Completion {
            return Err(SchedulerError::NotACompletion(completion.event_id.clone()));
        }
        let on = completion.date();
        let instance = self
            .by_item
            .get_mut(item_id)
            .and_then(|m| {
                m.values_mut()
                    .find(|i| i.status == DutyStatus::Pending && i.deadline() >= on)
            })
            .ok_or_else(|| SchedulerError::NoPendingInstance(item_id.into()))?;
        instance.status = DutyStatus::Completed;
        instance.completed_by = Some(completion.event_id.clone());
        Ok(instance.clone())
    }

    /// Marks duties overdue once their grace period has passed and returns
    /// the resulting deductions. Fixed penalties are charged once, on the
    /// first overdue day; per-day penalties are charged for every overdue day
    /// up to `clock`, stopping at the end of the month the duty became
    /// overdue in. Event ids and timestamps depend only on the duty and the
    /// charged day, so sweeping day by day and sweeping once give the same
    /// events.
    pub fn sweep_overdue(&mut self, graph: &Graph, clock: NaiveDate) -> Result<Vec<ScoreEvent>, SchedulerError> {
        if self.last_swept.is_some_and(|swept| clock <= swept) {
            return Err(SchedulerError::AlreadySwept(clock));
        }
        let mut events = Vec::new();
        for instance in self.by_item.values_mut().flat_map(|m| m.values_mut()) {
            let Some(rule) = graph.item(&instance.item_id).and_then(|i| i.periodic_rule) else {
                continue;
            };
            let first_overdue = clock::next_day(instance.deadline());
            if instance.status == DutyStatus::Pending && first_overdue <= clock {
                instance.status = DutyStatus::Overdue;
                match rule.score_method {
                    ScoreMethod::FixedPenalty => events.push(ScoreEvent {
                        event_id: Id::new(format!("od-{}", instance.instance_id)),
                        timestamp: clock::end_of_day(first_overdue),
                        item_id: instance.item_id.clone(),
                        kind: EventKind::OverdueDuty,
                        points: -rule.penalty_points,
                        reason: format!("duty {} due {} overdue", instance.instance_id, instance.due_date),
                        source: EventSource::Perception,
                    }),
                    ScoreMethod::PerDayPenalty => instance.charged_through = Some(instance.deadline()),
                }
            }
            if instance.status == DutyStatus::Overdue && rule.score_method == ScoreMethod::PerDayPenalty {
                let stop = clock.min(clock::month_end(first_overdue));
                let from = instance.charged_through.map_or(first_overdue, clock::next_day);
                for day in clock::days_between(from, stop) {
                    events.push(ScoreEvent {
                        event_id: Id::new(format!("od-{}-{}", instance.instance_id, day)),
                        timestamp: clock::end_of_day(day),
                        item_id: instance.item_id.clone(),
                        kind: EventKind::OverdueDuty,
                        points: -rule.penalty_points,
                        reason: format!(
                            "duty {} due {} overdue on {}",
                            instance.instance_id, instance.due_date, day
                        ),
                        source: EventSource::Perception,
                    });
                    instance.charged_through = Some(day);
                }
            }
        }
        self.last_swept = Some(clock);
        events.sort_by_key(|a| a.key());
        Ok(events)
    }
}
