//! Seeded synthetic workloads. A scenario is a pure function of its
//! `ScenarioSpec`: the same spec always produces the same graph, rules,
//! duty schedule and day-by-day inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock;
use crate::domain::{EntitySpec, Graph, GraphCommand, ItemSpec, PeriodicRule, Role, ScoreMethod};
use crate::ids::Id;
use crate::oracle::{self, Topology};
use crate::scoring::{AccountabilityRow, BandPolicy, EventKind, EventSource, Notification, ScoreEvent, Scores};
use crate::seed;
use crate::system::{System, SystemError};
use crate::telemetry::{Comparator, DeductionMode, SensorReading, ThresholdRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub days: u32,
    pub start: NaiveDate,
    /// Graph shape; when all three are unset the demo network is used.
    #[serde(default)]
    pub enterprises: Option<u32>,
    #[serde(default)]
    pub stations_per_enterprise: Option<u32>,
    #[serde(default)]
    pub items_per_list: Option<u32>,
    /// Expected manual/perception events per station per day.
    pub event_rate: f64,
    /// Expected breach episodes per sensor per day.
    pub breach_rate: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            seed: 42,
            days: 30,
            start: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            enterprises: None,
            stations_per_enterprise: None,
            items_per_list: None,
            event_rate: 2.5,
            breach_rate: 0.3,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("ingesting {record} failed: {source}")]
    Ingest {
        record: String,
        #[source]
        source: SystemError,
    },
    #[error("writing traces: {0}")]
    Io(#[from] io::Error),
}

impl ScenarioSpec {
    pub fn check(&self) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::InvalidSpec(m.into()));
        if self.days < 1 {
            return bad("days must be at least 1");
        }
        for (name, count) in [
            ("enterprises", self.enterprises),
            ("stations_per_enterprise", self.stations_per_enterprise),
            ("items_per_list", self.items_per_list),
        ] {
            if count == Some(0) {
                return Err(SimulationError::InvalidSpec(format!("{name} must be at least 1")));
            }
        }
        if !(self.event_rate.is_finite() && self.event_rate >= 0.0) {
            return bad("event_rate must be >= 0");
        }
        if !(self.breach_rate.is_finite() && self.breach_rate >= 0.0) {
            return bad("breach_rate must be >= 0");
        }
        Ok(())
    }

    pub fn uses_demo_graph(&self) -> bool {
        self.enterprises.is_none() && self.stations_per_enterprise.is_none() && self.items_per_list.is_none()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> {
        let start = self.start;
        (0..self.days).map(move |d| clock::add_days(start, d.into()))
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Graph, rules and duty schedule a scenario starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub graph_commands: Vec<GraphCommand>,
    pub rules: Vec<ThresholdRule>,
    pub duties: Vec<DutyPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutyPlan {
    pub item_id: Id,
    pub anchor: NaiveDate,
    pub horizon_days: u32,
}

pub fn setup(spec: &ScenarioSpec) -> Setup {
    let graph_commands = if spec.uses_demo_graph() {
        seed::demo_commands(&seed::default_templates())
    } else {
        synthetic_commands(spec)
    };
    let mut graph = Graph::new();
    for command in &graph_commands {
        graph.apply(command).expect("generated commands are valid");
    }
    let rules = if spec.uses_demo_graph() {
        seed::demo_rules(&graph)
    } else {
        synthetic_rules(&graph)
    };
    let duties = graph
        .items()
        .filter(|i| i.periodic_rule.is_some())
        .map(|i| DutyPlan {
            item_id: i.id.clone(),
            anchor: spec.start,
            horizon_days: spec.days,
        })
        .collect();
    Setup {
        graph_commands,
        rules,
        duties,
    }
}

fn synthetic_commands(spec: &ScenarioSpec) -> Vec<GraphCommand> {
    const CATEGORIES: [&str; 3] = ["shopping_mall", "hazardous_chemicals", "other"];
    let mut rng = spec.rng(u64::MAX);
    let enterprises = spec.enterprises.unwrap_or(2);
    let stations = spec.stations_per_enterprise.unwrap_or(2);
    let items = spec.items_per_list.unwrap_or(3);
    let add = |parent: Option<String>, spec: EntitySpec| GraphCommand::AddEntity {
        parent_id: parent.map(Id::from),
        spec,
    };
    let mut out = vec![add(
        None,
        EntitySpec::Company {
            id: Some(seed::DEMO_COMPANY.into()),
            name: "Synthetic service company".into(),
        },
    )];
    for e in 1..=enterprises {
        let enterprise = format!("E{e}");
        out.push(add(
            Some(seed::DEMO_COMPANY.into()),
            EntitySpec::Enterprise {
                id: Some(enterprise.as_str().into()),
                name: format!("Enterprise {e}"),
                category: CATEGORIES[(e as usize - 1) % CATEGORIES.len()].into(),
            },
        ));
        for s in 1..=stations {
            let person = format!("P{e}-{s}");
            let station = format!("S{e}-{s}");
            out.push(add(
                None,
                EntitySpec::Personnel {
                    id: Some(person.as_str().into()),
                    name: format!("Person {e}-{s}"),
                    role: if s == 1 { Role::Leader } else { Role::Staff },
                },
            ));
            out.push(add(
                Some(enterprise.clone()),
                EntitySpec::Station {
                    id: Some(station.as_str().into()),
                    name: format!("Station {e}-{s}"),
                    personnel_id: person.as_str().into(),
                },
            ));
            for l in 1..=2u32 {
                let item_specs = (1..=items)
                    .map(|i| ItemSpec {
                        id: Some(format!("{station}-L{l}-I{i}").into()),
                        description: format!("Duty {i} of list {l}"),
                        legal_basis: "synthetic".into(),
                        weight: f64::from(rng.gen_range(1..=5u32)),
                        periodic_rule: (i == 1).then_some(PeriodicRule {
                            cycle_days: 7,
                            grace_days: 1,
                            score_method: if l == 1 {
                                ScoreMethod::FixedPenalty
                            } else {
                                ScoreMethod::PerDayPenalty
                            },
                            penalty_points: if l == 1 { 10.0 } else { 2.0 },
                        }),
                    })
                    .collect();
                out.push(add(
                    Some(station.clone()),
                    EntitySpec::List {
                        id: Some(format!("{station}-L{l}").into()),
                        list_weight: f64::from(rng.gen_range(1..=4u32)),
                        items: item_specs,
                    },
                ));
            }
        }
    }
    out
}

fn synthetic_rules(graph: &Graph) -> Vec<ThresholdRule> {
    const MODES: [DeductionMode; 3] = [
        DeductionMode::OncePerBreach,
        DeductionMode::PerOccurrence,
        DeductionMode::PerDayWhileActive,
    ];
    graph
        .stations()
        .enumerate()
        .filter_map(|(n, station)| {
            let list = graph.list(station.list_ids.first()?)?;
            let target = list.item_ids.first()?.clone();
            Some(ThresholdRule {
                rule_id: format!("R-{}", station.id).into(),
                sensor_id: format!("sensor-{}", station.id),
                metric: "pressure".into(),
                comparator: Comparator::Gt,
                critical_value: 1.5,
                unit: "MPa".into(),
                deduction_mode: MODES[n % MODES.len()],
                penalty_points: 3.0,
                target_item_id: target,
                cooldown_hours: 6.0,
            })
        })
        .collect()
}

/// Inputs for one simulated day, each list in timestamp order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DayPlan {
    pub date: NaiveDate,
    pub events: Vec<ScoreEvent>,
    pub readings: Vec<SensorReading>,
}

/// One day's input, in the order it is submitted.
#[derive(Debug, Clone, PartialEq)]
pub enum Input<'a> {
    Event(&'a ScoreEvent),
    Reading(&'a SensorReading),
}

impl DayPlan {
    /// Events and readings merged by timestamp; readings first on ties.
    pub fn inputs(&self) -> Vec<Input<'_>> {
        let mut out: Vec<(chrono::DateTime<chrono::Utc>, u8, usize, Input<'_>)> = Vec::new();
        out.extend(
            self.readings
                .iter()
                .enumerate()
                .map(|(n, r)| (r.timestamp, 0, n, Input::Reading(r))),
        );
        out.extend(
            self.events
                .iter()
                .enumerate()
                .map(|(n, e)| (e.timestamp, 1, n, Input::Event(e))),
        );
        out.sort_by_key(|a| (a.0, a.1, a.2));
        out.into_iter().map(|(_, _, _, input)| input).collect()
    }
}

fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}

/// Generates the inputs of `date`. Each day draws from its own random
/// stream, so plans do not depend on what was ingested before.
pub fn plan_day(spec: &ScenarioSpec, setup: &Setup, graph: &Graph, date: NaiveDate) -> DayPlan {
    let day_index = (date - spec.start).num_days().max(0) as u64;
    let mut rng = spec.rng(day_index);
    let midnight = clock::start_of_day(date);
    let mut events = Vec::new();

    // Scheduled duties are carried out on their due day unless missed; the
    // miss rate grows with the scenario's general lapse rate.
    let miss = spec.event_rate / (spec.event_rate + 5.0);
    for duty in &setup.duties {
        let Some(rule) = graph.item(&duty.item_id).and_then(|i| i.periodic_rule) else {
            continue;
        };
        let offset = (date - duty.anchor).num_days();
        if offset > 0 && offset % i64::from(rule.cycle_days) == 0 && !rng.gen_bool(miss) {
            events.push(ScoreEvent {
                event_id: format!("sim-{date}-duty-{}", duty.item_id).into(),
                timestamp: midnight + Duration::seconds(rng.gen_range(8 * 3600..18 * 3600)),
                item_id: duty.item_id.clone(),
                kind: EventKind::Completion,
                points: 0.0,
                reason: "scheduled duty carried out".into(),
                source: EventSource::Perception,
            });
        }
    }

    for station in graph.stations() {
        let items: Vec<&Id> = station
            .list_ids
            .iter()
            .filter_map(|l| graph.list(l))
            .flat_map(|l| l.item_ids.iter())
            .collect();
        if items.is_empty() {
            continue;
        }
        for k in 0..poisson(&mut rng, spec.event_rate) {
            let item_id = items[rng.gen_range(0..items.len())].clone();
            let timestamp = midnight + Duration::seconds(rng.gen_range(6 * 3600..22 * 3600));
            let roll: f64 = rng.gen();
            let (kind, points, reason, source) = if roll < 0.3 {
                (
                    EventKind::Completion,
                    0.0,
                    "duty executed".to_string(),
                    EventSource::Perception,
                )
            } else if roll < 0.85 {
                let p = rng.gen_range(1..=8u32);
                (
                    EventKind::ManualDeduction,
                    -f64::from(p),
                    format!("inspection found a lapse ({p} points)"),
                    EventSource::Manual,
                )
            } else {
                let p = rng.gen_range(1..=3u32);
                (
                    EventKind::Award,
                    f64::from(p),
                    format!("commended by supervisor ({p} points)"),
                    EventSource::Manual,
                )
            };
            events.push(ScoreEvent {
                event_id: format!("sim-{date}-{}-{k}", station.id).into(),
                timestamp,
                item_id,
                kind,
                points,
                reason,
                source,
            });
        }
    }
    events.sort_by_key(|a| a.key());

    let sensors: BTreeMap<&str, &ThresholdRule> = setup.rules.iter().map(|r| (r.sensor_id.as_str(), r)).collect();
    let mut readings = Vec::new();
    const SLOTS: u32 = 6;
    for (sensor, rule) in sensors {
        let mut breaching = BTreeSet::new();
        for _ in 0..poisson(&mut rng, spec.breach_rate) {
            let start = rng.gen_range(0..SLOTS);
            let len = rng.gen_range(1..=3u32);
            breaching.extend(start..(start + len).min(SLOTS));
        }
        for slot in 0..SLOTS {
            let factor = if breaching.contains(&slot) {
                rng.gen_range(1.05..1.3)
            } else {
                rng.gen_range(0.6..0.95)
            };
            let value = match rule.comparator {
                Comparator::Gt | Comparator::Ge => rule.critical_value * factor,
                Comparator::Lt | Comparator::Le => rule.critical_value / factor,
            };
            readings.push(SensorReading {
                reading_id: format!("rd-{sensor}-{date}-{slot}").into(),
                sensor_id: sensor.to_owned(),
                metric: rule.metric.clone(),
                value: (value * 1000.0).round() / 1000.0,
                unit: rule.unit.clone(),
                timestamp: midnight + Duration::hours(i64::from(slot) * 4) + Duration::minutes(rng.gen_range(0..60)),
            });
        }
    }
    readings.sort_by(|a, b| (a.timestamp, &a.reading_id).cmp(&(b.timestamp, &b.reading_id)));
    DayPlan { date, events, readings }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub spec: ScenarioSpec,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub days_closed: u32,
    pub events_submitted: usize,
    pub readings_submitted: usize,
    pub ledger_events: usize,
    pub scores: Scores,
    pub reminders: Vec<Notification>,
    pub accountability: BTreeMap<Id, Vec<AccountabilityRow>>,
    /// Largest gap between the final scores and the brute-force oracle.
    pub oracle_max_difference: Option<f64>,
}

/// Brings a system to the scenario's starting state. An already seeded
/// graph is kept as it is.
pub fn prepare(system: &mut System, setup: &Setup) -> Result<(), SimulationError> {
    let ingest = |record: String| move |source| SimulationError::Ingest { record, source };
    if system.graph().company(seed::DEMO_COMPANY).is_none() {
        for command in &setup.graph_commands {
            system
                .apply_graph(command.clone())
                .map_err(ingest(serde_json::to_string(command).unwrap_or_default()))?;
        }
    }
    for rule in &setup.rules {
        system
            .register_rule(rule.clone())
            .map_err(ingest(serde_json::to_string(rule).unwrap_or_default()))?;
    }
    for duty in &setup.duties {
        system
            .generate_duties(&duty.item_id, duty.anchor, duty.horizon_days)
            .map_err(ingest(serde_json::to_string(duty).unwrap_or_default()))?;
    }
    Ok(())
}

/// Runs a full scenario, closing each simulated day. Input traces are
/// written to `trace_dir` when given.
pub fn run(
    system: &mut System,
    spec: &ScenarioSpec,
    trace_dir: Option<&Path>,
) -> Result<SimulationReport, SimulationError> {
    spec.check()?;
    let setup = setup(spec);
    prepare(system, &setup)?;

    let mut event_trace = String::new();
    let mut reading_trace = String::new();
    let (mut events_submitted, mut readings_submitted) = (0, 0);
    let mut days_closed = 0;
    for date in spec.dates() {
        let plan = plan_day(spec, &setup, system.graph(), date);
        for input in plan.inputs() {
            match input {
                Input::Event(e) => {
                    let line = serde_json::to_string(e).expect("events serialize");
                    system
                        .submit_event(e.clone())
                        .map_err(|source| SimulationError::Ingest {
                            record: line.clone(),
                            source,
                        })?;
                    event_trace.push_str(&line);
                    event_trace.push('\n');
                    events_submitted += 1;
                }
                Input::Reading(r) => {
                    let line = serde_json::to_string(r).expect("readings serialize");
                    system
                        .ingest_reading(r.clone())
                        .map_err(|source| SimulationError::Ingest {
                            record: line.clone(),
                            source,
                        })?;
                    reading_trace.push_str(&line);
                    reading_trace.push('\n');
                    readings_submitted += 1;
                }
            }
        }
        system.close_day(date).map_err(|source| SimulationError::Ingest {
            record: format!("close-day {date}"),
            source,
        })?;
        days_closed += 1;
    }
    if let Some(dir) = trace_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("trace-events.jsonl"), event_trace)?;
        fs::write(dir.join("trace-readings.jsonl"), reading_trace)?;
    }

    let last_day = clock::add_days(spec.start, u64::from(spec.days - 1));
    let policy = BandPolicy::default();
    let scores = system.scores_for(last_day);
    let ledger: Vec<ScoreEvent> = system.engine().events().into_iter().cloned().collect();
    let expected = oracle::scores(&Topology::of(system.graph()), &ledger, last_day);
    let reminders = system
        .reminders(last_day, &policy)
        .map_err(|source| SimulationError::Ingest {
            record: "reminders".into(),
            source,
        })?;
    let mut accountability = BTreeMap::new();
    for enterprise in system.graph().enterprises() {
        if let Ok(rows) = system.accountability(&enterprise.id, last_day, &policy) {
            accountability.insert(enterprise.id.clone(), rows);
        }
    }
    Ok(SimulationReport {
        spec: spec.clone(),
        first_day: spec.start,
        last_day,
        days_closed,
        events_submitted,
        readings_submitted,
        ledger_events: ledger.len(),
        oracle_max_difference: oracle::max_difference(&expected, &scores),
        scores,
        reminders,
        accountability,
    })
}
