//! Builders shared by the unit tests.

use chrono::{DateTime, NaiveDate, TimeZone, Utc};

use crate::domain::{EntitySpec, Graph, ItemSpec, PeriodicRule, Role};
use crate::ids::Id;
use crate::scoring::{EventKind, EventSource, ScoreEvent};

/// Lists of one station: (list weight, item weights).
pub type StationShape = Vec<(f64, Vec<f64>)>;

/// Builds C1 with one enterprise per entry of `shape`. Ids follow the
/// position: `E1`, `E1-S1`, `E1-S1-L1`, `E1-S1-L1-I1`. The first station
/// of each enterprise is held by a leader.
pub fn graph(shape: &[Vec<StationShape>]) -> Graph {
    let mut g = Graph::new();
    g.add_entity(
        None,
        EntitySpec::Company {
            id: Some("C1".into()),
            name: "Test company".into(),
        },
    )
    .unwrap();
    for (e, stations) in shape.iter().enumerate() {
        let enterprise = format!("E{}", e + 1);
        g.add_entity(
            Some("C1"),
            EntitySpec::Enterprise {
                id: Some(enterprise.as_str().into()),
                name: enterprise.clone(),
                category: "other".into(),
            },
        )
        .unwrap();
        for (s, lists) in stations.iter().enumerate() {
            let station = format!("{enterprise}-S{}", s + 1);
            let person = format!("P-{station}");
            g.add_entity(
                None,
                EntitySpec::Personnel {
                    id: Some(person.as_str().into()),
                    name: person.clone(),
                    role: if s == 0 { Role::Leader } else { Role::Staff },
                },
            )
            .unwrap();
            g.add_entity(
                Some(&enterprise),
                EntitySpec::Station {
                    id: Some(station.as_str().into()),
                    name: station.clone(),
                    personnel_id: person.as_str().into(),
                },
            )
            .unwrap();
            for (l, (list_weight, weights)) in lists.iter().enumerate() {
                let list = format!("{station}-L{}", l + 1);
                let items = weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| ItemSpec {
                        id: Some(format!("{list}-I{}", i + 1).into()),
                        description: format!("duty {}", i + 1),
                        legal_basis: "test".into(),
                        weight: *w,
                        periodic_rule: None,
                    })
                    .collect();
                g.add_entity(
                    Some(&station),
                    EntitySpec::List {
                        id: Some(list.as_str().into()),
                        list_weight: *list_weight,
                        items,
                    },
                )
                .unwrap();
            }
        }
    }
    g
}

/// One enterprise, one station, one list with a single item `I`.
pub fn single_item(periodic_rule: Option<PeriodicRule>) -> Graph {
    let mut g = graph(&[]);
    g.add_entity(
        Some("C1"),
        EntitySpec::Enterprise {
            id: Some("E1".into()),
            name: "E1".into(),
            category: "other".into(),
        },
    )
    .unwrap();
    g.add_entity(
        None,
        EntitySpec::Personnel {
            id: Some("P1".into()),
            name: "P1".into(),
            role: Role::Leader,
        },
    )
    .unwrap();
    g.add_entity(
        Some("E1"),
        EntitySpec::Station {
            id: Some("S1".into()),
            name: "S1".into(),
            personnel_id: "P1".into(),
        },
    )
    .unwrap();
    g.add_entity(
        Some("S1"),
        EntitySpec::List {
            id: Some("L1".into()),
            list_weight: 1.0,
            items: vec![ItemSpec {
                id: Some("I".into()),
                description: "duty".into(),
                legal_basis: "test".into(),
                weight: 1.0,
                periodic_rule,
            }],
        },
    )
    .unwrap();
    g
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn at(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, h, 0, 0).unwrap()
}

/// A manual deduction, award or completion depending on the sign of `points`.
pub fn event(id: &str, item: &str, timestamp: DateTime<Utc>, points: f64) -> ScoreEvent {
    let kind = if points < 0.0 {
        EventKind::ManualDeduction
    } else if points > 0.0 {
        EventKind::Award
    } else {
        EventKind::Completion
    };
    ScoreEvent {
        event_id: Id::from(id),
        timestamp,
        item_id: Id::from(item),
        kind,
        points,
        reason: format!("reason for {id}"),
        source: EventSource::Manual,
    }
}
