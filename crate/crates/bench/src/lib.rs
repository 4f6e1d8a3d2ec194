//! Workloads shared by the benchmarks.

use chrono::{Duration, NaiveDate};
use ior_core::scoring::ScoreEvent;
use ior_core::simulate::{self, Input, ScenarioSpec};
use ior_core::system::System;

/// Alternating deductions and awards large enough to hit both clamps.
pub fn deltas(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| match i % 4 {
            0 => -7.5,
            1 => -30.0,
            2 => 12.0,
            _ => 45.0,
        })
        .collect()
}

/// An in-memory system holding the default scenario's first `days` days,
/// all ingested and none closed. Returns the system and the first day.
pub fn open_days(days: u32) -> (System, NaiveDate) {
    let spec = ScenarioSpec {
        days,
        ..ScenarioSpec::default()
    };
    let setup = simulate::setup(&spec);
    let mut system = System::in_memory();
    simulate::prepare(&mut system, &setup).expect("scenario setup applies");
    for date in spec.dates() {
        let plan = simulate::plan_day(&spec, &setup, system.graph(), date);
        for input in plan.inputs() {
            match input {
                Input::Event(e) => {
                    system.submit_event(e.clone()).expect("planned event applies");
                }
                Input::Reading(r) => {
                    system.ingest_reading(r.clone()).expect("planned reading applies");
                }
            }
        }
    }
    (system, spec.start)
}

/// The ledger of [`open_days`] in ledger order.
pub fn ledger(system: &System) -> Vec<ScoreEvent> {
    system.engine().events().into_iter().cloned().collect()
}

pub fn last_day(first: NaiveDate, days: u32) -> NaiveDate {
    first + Duration::days(i64::from(days) - 1)
}
