use std::collections::{BTreeMap, HashSet};
use std::ops::Bound;

use chrono::{DateTime, NaiveDate, Utc};

use super::{
    clamp_score, report, AccountabilityRow, BandPolicy, DailySnapshot, Level, Notification, Reason, ScoreError,
    ScoreEvent, ScoreState, Scores, SeriesPoint, FULL_SCORE, MAX_SERIES_POINTS,
};
use crate::clock::{self, YearMonth};
use crate::domain::{normalize, Graph};
use crate::ids::Id;

type LedgerKey = (DateTime<Utc>, Id);

#[derive(Debug, Clone, PartialEq)]
pub struct ApplyOutcome {
    pub state: ScoreState,
    pub deduplicated: bool,
}

/// Holds the ledger and the closed-day snapshots.
#[derive(Debug, Clone, Default)]
pub struct ScoringEngine {
    seen: HashSet<Id>,
    by_item: BTreeMap<Id, BTreeMap<LedgerKey, ScoreEvent>>,
    snapshots: BTreeMap<NaiveDate, DailySnapshot>,
}

/// Folds already-ordered deltas from full score, clamping after each step.
pub fn fold_scores<'a>(points: impl IntoIterator<Item = &'a f64>) -> f64 {
    points
        .into_iter()
        .fold(FULL_SCORE, |score, delta| clamp_score(score + delta))
}

impl ScoringEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains_event(&self, event_id: &str) -> bool {
        self.seen.contains(event_id)
    }

    pub fn event_count(&self) -> usize {
        self.seen.len()
    }

    pub fn has_events_for(&self, item_id: &str) -> bool {
        self.by_item.get(item_id).is_some_and(|m| !m.is_empty())
    }

    /// All events in ledger order.
    pub fn events(&self) -> Vec<&ScoreEvent> {
        let mut all: Vec<&ScoreEvent> = self.by_item.values().flat_map(|m| m.values()).collect();
        all.sort_by(|a, b| (a.timestamp, &a.event_id).cmp(&(b.timestamp, &b.event_id)));
        all
    }

    /// Timestamp of the latest event in the ledger.
    pub fn latest_event(&self) -> Option<DateTime<Utc>> {
        self.by_item
            .values()
            .filter_map(|m| m.keys().next_back())
            .map(|k| k.0)
            .max()
    }

    pub fn last_closed(&self) -> Option<NaiveDate> {
        self.snapshots.keys().next_back().copied()
    }

    pub fn snapshot(&self, date: NaiveDate) -> Option<&DailySnapshot> {
        self.snapshots.get(&date)
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &DailySnapshot> {
        self.snapshots.values()
    }

    /// Records an event and returns the item's state for the event's month.
    /// A repeated `event_id` changes nothing.
    pub fn apply_event(&mut self, graph: &Graph, event: ScoreEvent) -> Result<ApplyOutcome, ScoreError> {
        if self.seen.contains(&event.event_id) {
            let stored = self
                .by_item
                .values()
                .flat_map(|m| m.values())
                .find(|e| e.event_id == event.event_id)
                .expect("seen events are stored");
            return Ok(ApplyOutcome {
                state: self.period_state(&stored.item_id, stored.timestamp),
                deduplicated: true,
            });
        }
        event.check()?;
        if graph.item(&event.item_id).is_none() {
            return Err(ScoreError::UnknownItem(event.item_id));
        }
        self.check_open(&event)?;
        let (item_id, timestamp) = (event.item_id.clone(), event.timestamp);
        self.seen.insert(event.event_id.clone());
        self.by_item
            .entry(item_id.clone())
            .or_default()
            .insert(event.key(), event);
        Ok(ApplyOutcome {
            state: self.period_state(&item_id, timestamp),
            deduplicated: false,
        })
    }

    /// Rejects events dated on or before the last closed day.
    pub fn check_open(&self, event: &ScoreEvent) -> Result<(), ScoreError> {
        match self.last_closed() {
            Some(closed) if event.date() <= closed => Err(ScoreError::LateEvent {
                event_id: event.event_id.clone(),
                date: event.date(),
            }),
            _ => Ok(()),
        }
    }

    fn period_state(&self, item_id: &Id, at: DateTime<Utc>) -> ScoreState {
        let period = YearMonth::of_instant(at);
        let start = clock::start_of_day(period.first_day());
        let end = clock::day_after_start(clock::month_end(period.first_day()));
        ScoreState {
            item_id: item_id.clone(),
            period_anchor: period,
            score: self.fold_between(item_id, start, end),
        }
    }

    fn fold_between(&self, item_id: &str, start: DateTime<Utc>, end: DateTime<Utc>) -> f64 {
        let Some(events) = self.by_item.get(item_id) else {
            return FULL_SCORE;
        };
        let range = events.range((
            Bound::Included((start, Id::default())),
            Bound::Excluded((end, Id::default())),
        ));
        fold_scores(range.map(|(_, e)| &e.points))
    }

    fn raw_item_score(&self, item_id: &str, as_of: NaiveDate) -> f64 {
        let start = clock::start_of_day(clock::month_start(as_of));
        self.fold_between(item_id, start, clock::day_after_start(as_of))
    }

    /// Score of an item over its month, counting events up to the end of `as_of`.
    pub fn item_score(&self, graph: &Graph, item_id: &str, as_of: NaiveDate) -> Result<f64, ScoreError> {
        if graph.item(item_id).is_none() {
            return Err(ScoreError::UnknownItem(item_id.into()));
        }
        Ok(self.raw_item_score(item_id, as_of))
    }

    pub fn list_score(&self, graph: &Graph, list_id: &str, as_of: NaiveDate) -> Result<f64, ScoreError> {
        let list = graph
            .list(list_id)
            .ok_or_else(|| ScoreError::UnknownList(list_id.into()))?;
        let items: BTreeMap<Id, f64> = list
            .item_ids
            .iter()
            .map(|i| (i.clone(), self.raw_item_score(i, as_of)))
            .collect();
        aggregate(graph, items)
            .list_scores
            .get(list_id)
            .copied()
            .ok_or_else(|| ScoreError::EmptyChildren(list_id.into()))
    }

    pub fn station_score(&self, graph: &Graph, station_id: &str, as_of: NaiveDate) -> Result<f64, ScoreError> {
        if graph.station(station_id).is_none() {
            return Err(ScoreError::UnknownEntity(station_id.into()));
        }
        self.scores_as_of(graph, as_of)
            .station_scores
            .get(station_id)
            .copied()
            .ok_or_else(|| ScoreError::EmptyChildren(station_id.into()))
    }

    pub fn enterprise_score(&self, graph: &Graph, enterprise_id: &str, as_of: NaiveDate) -> Result<f64, ScoreError> {
        if graph.enterprise(enterprise_id).is_none() {
            return Err(ScoreError::UnknownEntity(enterprise_id.into()));
        }
        self.scores_as_of(graph, as_of)
            .enterprise_scores
            .get(enterprise_id)
            .copied()
            .ok_or_else(|| ScoreError::EmptyChildren(enterprise_id.into()))
    }

    /// Live scores of every subject as of the end of `as_of`.
    pub fn scores_as_of(&self, graph: &Graph, as_of: NaiveDate) -> Scores {
        let items = graph
            .items()
            .map(|item| (item.id.clone(), self.raw_item_score(&item.id, as_of)))
            .collect();
        aggregate(graph, items)
    }

    /// Reasons recorded on `date`, in ledger order.
    pub fn reasons_on(&self, date: NaiveDate) -> Vec<Reason> {
        let (start, end) = (clock::start_of_day(date), clock::day_after_start(date));
        let mut day: Vec<&ScoreEvent> = self
            .by_item
            .values()
            .flat_map(|m| {
                m.range((
                    Bound::Included((start, Id::default())),
                    Bound::Excluded((end, Id::default())),
                ))
                .map(|(_, e)| e)
            })
            .collect();
        day.sort_by(|a, b| (a.timestamp, &a.event_id).cmp(&(b.timestamp, &b.event_id)));
        day.into_iter()
            .map(|e| Reason {
                item_id: e.item_id.clone(),
                points: e.points,
                reason: e.reason.clone(),
            })
            .collect()
    }

    /// Seals `date`. Days close in increasing order; afterwards no event
    /// dated on or before `date` is accepted.
    pub fn close_day(&mut self, graph: &Graph, date: NaiveDate) -> Result<DailySnapshot, ScoreError> {
        if self.last_closed().is_some_and(|closed| date <= closed) {
            return Err(ScoreError::AlreadyClosed(date));
        }
        let snapshot = DailySnapshot {
            date,
            scores: self.scores_as_of(graph, date),
            reasons: self.reasons_on(date),
        };
        self.snapshots.insert(date, snapshot.clone());
        Ok(snapshot)
    }

    /// Installs a snapshot read back from storage.
    pub fn restore_snapshot(&mut self, snapshot: DailySnapshot) -> Result<(), ScoreError> {
        if self.last_closed().is_some_and(|closed| snapshot.date <= closed) {
            return Err(ScoreError::AlreadyClosed(snapshot.date));
        }
        self.snapshots.insert(snapshot.date, snapshot);
        Ok(())
    }

    /// Daily values for one subject, read from snapshots only.
    pub fn score_series(
        &self,
        level: Level,
        id: &str,
        from: NaiveDate,
        to: NaiveDate,
    ) -> Result<Vec<SeriesPoint>, ScoreError> {
        if from > to {
            return Err(ScoreError::InvalidRange { from, to });
        }
        let days = (to - from).num_days() as usize + 1;
        if days > MAX_SERIES_POINTS {
            return Err(ScoreError::RangeTooLarge(days));
        }
        clock::days_between(from, to)
            .map(|date| {
                let snapshot = self.snapshots.get(&date).ok_or(ScoreError::MissingSnapshot(date))?;
                let score =
                    snapshot
                        .scores
                        .level(level)
                        .get(id)
                        .copied()
                        .ok_or_else(|| ScoreError::UnknownSubject {
                            level,
                            id: id.into(),
                            date,
                        })?;
                Ok(SeriesPoint { date, score })
            })
            .collect()
    }

    pub fn low_score_reminders(
        &self,
        graph: &Graph,
        as_of: NaiveDate,
        policy: &BandPolicy,
    ) -> Result<Vec<Notification>, ScoreError> {
        report::low_score_reminders(graph, &self.scores_as_of(graph, as_of), policy)
    }

    pub fn accountability_report(
        &self,
        graph: &Graph,
        enterprise_id: &str,
        as_of: NaiveDate,
        policy: &BandPolicy,
    ) -> Result<Vec<AccountabilityRow>, ScoreError> {
        report::accountability_report(graph, &self.scores_as_of(graph, as_of), enterprise_id, policy)
    }
}

/// Rolls item scores up the tree. A subject is scored only when it has
/// children and every child is scored; weights are normalized on read.
pub fn aggregate(graph: &Graph, item_scores: BTreeMap<Id, f64>) -> Scores {
    let mut scores = Scores {
        item_scores,
        ..Scores::default()
    };
    for list in graph.lists() {
        let Some(weights) = list.item_ids.iter().map(|i| graph.item(i).map(|i| i.weight)).collect() else {
            continue;
        };
        if let Some(value) = weighted(&list.item_ids, weights, &scores.item_scores) {
            scores.list_scores.insert(list.id.clone(), value);
        }
    }
    for station in graph.stations() {
        let Some(weights) = station
            .list_ids
            .iter()
            .map(|l| graph.list(l).map(|l| l.list_weight))
            .collect()
        else {
            continue;
        };
        if let Some(value) = weighted(&station.list_ids, weights, &scores.list_scores) {
            scores.station_scores.insert(station.id.clone(), value);
        }
    }
    for enterprise in graph.enterprises() {
        if enterprise.station_ids.is_empty() {
            continue;
        }
        let children: Option<Vec<f64>> = enterprise
            .station_ids
            .iter()
            .map(|s| scores.station_scores.get(s).copied())
            .collect();
        if let Some(children) = children {
            let mean = children.iter().sum::<f64>() / children.len() as f64;
            scores
                .enterprise_scores
                .insert(enterprise.id.clone(), clamp_score(mean));
        }
    }
    scores
}

/// Σ wᵢ·sᵢ / Σ wᵢ over raw weights, which equals the sum over normalized
/// weights but keeps uniform children exact.
fn weighted(children: &[Id], weights: Vec<f64>, scores: &BTreeMap<Id, f64>) -> Option<f64> {
    normalize(&weights)?;
    let (mut total, mut mass) = (0.0, 0.0);
    for (child, weight) in children.iter().zip(&weights) {
        total += weight * scores.get(child)?;
        mass += weight;
    }
    Some(clamp_score(total / mass))
}
