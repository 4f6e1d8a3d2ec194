//! The responsibility network as one stateful service: graph, ledger,
//! telemetry and scheduler behind a single writer, optionally backed by a
//! data directory that is replayed on open.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock;
use crate::domain::{EntityKind, Graph, GraphCommand, GraphError};
use crate::ids::Id;
use crate::safety_map::{safety_map, MapCell, Region};
use crate::scheduler::{DutyInstance, Scheduler, SchedulerError};
use crate::scoring::{
    report, AccountabilityRow, BandPolicy, DailySnapshot, EventKind, Level, Notification, ScoreError, ScoreEvent,
    ScoreState, Scores, ScoringEngine, SeriesPoint,
};
use crate::store::{self, Record, Store, StoreError};
use crate::telemetry::{SensorReading, Telemetry, TelemetryError, ThresholdRule};

/// Non-graph entries of the graph log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SystemCommand {
    RegisterRule {
        rule: ThresholdRule,
    },
    GenerateDuties {
        item_id: Id,
        anchor: NaiveDate,
        horizon_days: u32,
    },
    CloseDay {
        date: NaiveDate,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlEntry {
    Graph(GraphCommand),
    System(SystemCommand),
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("reading `{reading_id}` targets {date}, which is already closed")]
    LateReading { reading_id: Id, date: NaiveDate },
    #[error("replay of record {seq} failed: {source}")]
    Replay {
        seq: u64,
        #[source]
        source: Box<SystemError>,
    },
    #[error("an earlier write failed; the service no longer accepts writes")]
    Poisoned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReceipt {
    pub event_id: Id,
    pub deduplicated: bool,
    pub state: ScoreState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_duty: Option<Id>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingReceipt {
    pub reading_id: Id,
    pub deduplicated: bool,
    pub emitted: Vec<ScoreEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloseReport {
    pub date: NaiveDate,
    pub emitted: Vec<ScoreEvent>,
    pub snapshot: DailySnapshot,
}

pub struct System {
    graph: Graph,
    engine: ScoringEngine,
    telemetry: Telemetry,
    scheduler: Scheduler,
    store: Option<Store>,
    next_seq: u64,
    replaying: bool,
    poisoned: bool,
}

impl Default for System {
    fn default() -> Self {
        Self::in_memory()
    }
}

enum Entry {
    Control(ControlEntry),
    Event(ScoreEvent),
    Reading(SensorReading),
}

impl System {
    pub fn in_memory() -> Self {
        System {
            graph: Graph::new(),
            engine: ScoringEngine::new(),
            telemetry: Telemetry::new(),
            scheduler: Scheduler::new(),
            store: None,
            next_seq: 1,
            replaying: false,
            poisoned: false,
        }
    }

    /// Locks `dir` and rebuilds state by replaying its logs.
    pub fn open(dir: &Path) -> Result<Self, SystemError> {
        let store = Store::open(dir)?;
        let mut entries: Vec<(u64, Entry)> = Vec::new();
        entries.extend(
            store::read_log::<ControlEntry>(&dir.join(store::GRAPH_LOG))?
                .into_iter()
                .map(|r| (r.seq, Entry::Control(r.body))),
        );
        entries.extend(
            store::read_log::<ScoreEvent>(&dir.join(store::LEDGER_LOG))?
                .into_iter()
                .map(|r| (r.seq, Entry::Event(r.body))),
        );
        entries.extend(
            store::read_log::<SensorReading>(&dir.join(store::READINGS_LOG))?
                .into_iter()
                .map(|r| (r.seq, Entry::Reading(r.body))),
        );
        entries.sort_by_key(|(seq, _)| *seq);

        let mut system = System::in_memory();
        system.store = Some(store);
        system.replaying = true;
        for (seq, entry) in entries {
            let result = match entry {
                Entry::Control(ControlEntry::Graph(cmd)) => system.apply_graph(cmd).map(drop),
                Entry::Control(ControlEntry::System(SystemCommand::RegisterRule { rule })) => {
                    system.register_rule(rule).map(drop)
                }
                Entry::Control(ControlEntry::System(SystemCommand::GenerateDuties {
                    item_id,
                    anchor,
                    horizon_days,
                })) => system.generate_duties(&item_id, anchor, horizon_days).map(drop),
                Entry::Control(ControlEntry::System(SystemCommand::CloseDay { date })) => {
                    system.close_day(date).map(drop)
                }
                Entry::Event(event) => system.submit_event(event).map(drop),
                Entry::Reading(reading) => system.ingest_reading(reading).map(drop),
            };
            result.map_err(|e| SystemError::Replay {
                seq,
                source: Box::new(e),
            })?;
            system.next_seq = system.next_seq.max(seq + 1);
        }
        system.replaying = false;
        Ok(system)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn engine(&self) -> &ScoringEngine {
        &self.engine
    }

    pub fn telemetry(&self) -> &Telemetry {
        &self.telemetry
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.store.as_ref().map(Store::dir)
    }

    fn guard(&self) -> Result<(), SystemError> {
        if self.poisoned {
            Err(SystemError::Poisoned)
        } else {
            Ok(())
        }
    }

    fn take_seq(&mut self) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        seq
    }

    fn persist(&mut self, write: impl FnOnce(&mut Store, u64) -> Result<(), StoreError>) -> Result<(), SystemError> {
        if self.replaying {
            return Ok(());
        }
        let seq = self.take_seq();
        let Some(store) = self.store.as_mut() else {
            return Ok(());
        };
        write(store, seq).map_err(|e| {
            self.poisoned = true;
            SystemError::from(e)
        })
    }

    fn persist_control(&mut self, entry: ControlEntry) -> Result<(), SystemError> {
        self.persist(|store, seq| store.append_graph(&Record { seq, body: entry }))
    }

    /// Applies a graph mutation. Items that carry ledger events, rules or
    /// duties cannot be removed.
    pub fn apply_graph(&mut self, command: GraphCommand) -> Result<Vec<Id>, SystemError> {
        self.guard()?;
        if let GraphCommand::RemoveEntity { id } = &command {
            if self.graph.kind_of(id) == Some(EntityKind::Item) {
                let by = if self.engine.has_events_for(id) {
                    Some("ledger events")
                } else if self.telemetry.targets(id) {
                    Some("threshold rules")
                } else if self.scheduler.has_instances(id) {
                    Some("duty instances")
                } else {
                    None
                };
                if let Some(by) = by {
                    return Err(GraphError::HasDependents {
                        id: id.clone(),
                        by: by.into(),
                    }
                    .into());
                }
            }
        }
        let mut next = self.graph.clone();
        let ids = next.apply(&command)?;
        if next != self.graph {
            self.persist_control(ControlEntry::Graph(command))?;
            self.graph = next;
        }
        Ok(ids)
    }

    pub fn register_rule(&mut self, rule: ThresholdRule) -> Result<Id, SystemError> {
        self.guard()?;
        if self.telemetry.rule(&rule.rule_id) == Some(&rule) {
            return Ok(rule.rule_id);
        }
        self.telemetry.validate_rule(&self.graph, &rule)?;
        self.persist_control(ControlEntry::System(SystemCommand::RegisterRule { rule: rule.clone() }))?;
        Ok(self.telemetry.register_rule(&self.graph, rule)?)
    }

    pub fn generate_duties(
        &mut self,
        item_id: &str,
        anchor: NaiveDate,
        horizon_days: u32,
    ) -> Result<Vec<DutyInstance>, SystemError> {
        self.guard()?;
        let before = (
            self.scheduler.anchor(item_id),
            self.scheduler.instances_of(item_id).count(),
        );
        let mut trial = self.scheduler.clone();
        let out = trial.generate_instances(&self.graph, item_id, anchor, horizon_days)?;
        let after = (trial.anchor(item_id), trial.instances_of(item_id).count());
        if before != after {
            self.persist_control(ControlEntry::System(SystemCommand::GenerateDuties {
                item_id: item_id.into(),
                anchor,
                horizon_days,
            }))?;
        }
        self.scheduler = trial;
        Ok(out)
    }

    /// Records a score event. Retrying with the same `event_id` is a no-op.
    pub fn submit_event(&mut self, event: ScoreEvent) -> Result<EventReceipt, SystemError> {
        self.guard()?;
        if self.engine.contains_event(&event.event_id) {
            let outcome = self.engine.apply_event(&self.graph, event.clone())?;
            return Ok(EventReceipt {
                event_id: event.event_id,
                deduplicated: true,
                state: outcome.state,
                matched_duty: None,
            });
        }
        event.check()?;
        if self.graph.item(&event.item_id).is_none() {
            return Err(ScoreError::UnknownItem(event.item_id).into());
        }
        self.engine.check_open(&event)?;
        let logged = event.clone();
        self.persist(|store, seq| store.append_ledger(&Record { seq, body: logged }))?;
        let outcome = self.engine.apply_event(&self.graph, event.clone())?;
        let matched_duty = if event.kind == EventKind::Completion {
            self.scheduler
                .mark_completed(&event.item_id, &event)
                .ok()
                .map(|d| d.instance_id)
        } else {
            None
        };
        Ok(EventReceipt {
            event_id: event.event_id,
            deduplicated: false,
            state: outcome.state,
            matched_duty,
        })
    }

    /// Records a reading and books the deductions it triggers.
    pub fn ingest_reading(&mut self, reading: SensorReading) -> Result<ReadingReceipt, SystemError> {
        self.guard()?;
        if self.telemetry.has_reading(&reading.reading_id) {
            return Ok(ReadingReceipt {
                reading_id: reading.reading_id,
                deduplicated: true,
                emitted: Vec::new(),
            });
        }
        self.telemetry.check_reading(&reading)?;
        let date = reading.timestamp.date_naive();
        if self.engine.last_closed().is_some_and(|closed| date <= closed) {
            return Err(SystemError::LateReading {
                reading_id: reading.reading_id,
                date,
            });
        }
        let logged = reading.clone();
        self.persist(|store, seq| store.append_reading(&Record { seq, body: logged }))?;
        let outcome = self.telemetry.ingest_reading(&reading)?;
        for event in &outcome.events {
            self.submit_event(event.clone())?;
        }
        Ok(ReadingReceipt {
            reading_id: reading.reading_id,
            deduplicated: false,
            emitted: outcome.events,
        })
    }

    /// End-of-day pipeline: accrue per-day breaches, sweep overdue duties,
    /// book what they emit, then seal the day's snapshot.
    pub fn close_day(&mut self, date: NaiveDate) -> Result<CloseReport, SystemError> {
        self.guard()?;
        if self.engine.last_closed().is_some_and(|closed| date <= closed) {
            return Err(ScoreError::AlreadyClosed(date).into());
        }
        let first = match self.engine.last_closed() {
            Some(closed) => clock::next_day(closed),
            None => self.telemetry.earliest_breach_day().map_or(date, |d| d.min(date)),
        };
        let mut emitted = Vec::new();
        for day in clock::days_between(first, date) {
            if !self.telemetry.is_accrued(day) {
                emitted.extend(self.telemetry.accrue_daily_breaches(day)?);
            }
        }
        if self.scheduler.last_swept().is_none_or(|swept| swept < date) {
            emitted.extend(self.scheduler.sweep_overdue(&self.graph, date)?);
        }
        emitted.sort_by_key(|a| a.key());
        for event in &emitted {
            self.submit_event(event.clone())?;
        }

        let stored = match self.store.as_ref() {
            Some(store) if self.replaying => store::read_snapshot(store.dir(), date)?,
            _ => None,
        };
        let snapshot = match stored {
            Some(snapshot) => {
                self.engine.restore_snapshot(snapshot.clone())?;
                snapshot
            }
            None => {
                let snapshot = self.engine.close_day(&self.graph, date)?;
                if let Some(store) = self.store.as_ref() {
                    store.write_snapshot(&snapshot).inspect_err(|_| self.poisoned = true)?;
                }
                snapshot
            }
        };
        self.persist_control(ControlEntry::System(SystemCommand::CloseDay { date }))?;
        Ok(CloseReport {
            date,
            emitted,
            snapshot,
        })
    }

    /// The latest day the system knows about: the last closed day or the
    /// day of the latest event, whichever is later.
    pub fn current_day(&self) -> Option<NaiveDate> {
        let latest = self.engine.latest_event().map(|t| t.date_naive());
        self.engine.last_closed().max(latest)
    }

    /// Scores from the day's snapshot when closed, otherwise computed live.
    pub fn scores_for(&self, date: NaiveDate) -> Scores {
        match self.engine.snapshot(date) {
            Some(snapshot) => snapshot.scores.clone(),
            None => self.engine.scores_as_of(&self.graph, date),
        }
    }

    pub fn score_series(
        &self,
        level: Level,
        id: &str,
        from: NaiveDate,
        to: NaiveDate,
    ) -> Result<Vec<SeriesPoint>, SystemError> {
        Ok(self.engine.score_series(level, id, from, to)?)
    }

    pub fn reminders(&self, date: NaiveDate, policy: &BandPolicy) -> Result<Vec<Notification>, SystemError> {
        Ok(report::low_score_reminders(
            &self.graph,
            &self.scores_for(date),
            policy,
        )?)
    }

    pub fn accountability(
        &self,
        enterprise_id: &str,
        date: NaiveDate,
        policy: &BandPolicy,
    ) -> Result<Vec<AccountabilityRow>, SystemError> {
        Ok(report::accountability_report(
            &self.graph,
            &self.scores_for(date),
            enterprise_id,
            policy,
        )?)
    }

    pub fn safety_map(
        &self,
        date: NaiveDate,
        regions: &[Region],
        policy: &BandPolicy,
    ) -> Result<Vec<MapCell>, SystemError> {
        let snapshot = self.engine.snapshot(date).ok_or(ScoreError::MissingSnapshot(date))?;
        Ok(safety_map(&snapshot.scores, regions, policy)?)
    }
}
