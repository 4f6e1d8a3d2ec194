//! Brute-force score recomputation used to cross-check the engine and the
//! stored snapshots. It shares no code with the scoring engine: every call
//! re-sorts the raw events and re-folds from scratch.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};

use crate::domain::Graph;
use crate::ids::Id;
use crate::scoring::{ScoreEvent, Scores};

/// The weighted tree as plain vectors of raw weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    pub items: Vec<Id>,
    pub lists: Vec<(Id, Vec<(Id, f64)>)>,
    pub stations: Vec<(Id, Vec<(Id, f64)>)>,
    pub enterprises: Vec<(Id, Vec<Id>)>,
}

impl Topology {
    pub fn of(graph: &Graph) -> Self {
        Topology {
            items: graph.items().map(|i| i.id.clone()).collect(),
            lists: graph
                .lists()
                .map(|l| {
                    let children = l
                        .item_ids
                        .iter()
                        .map(|i| (i.clone(), graph.item(i).map_or(f64::NAN, |item| item.weight)))
                        .collect();
                    (l.id.clone(), children)
                })
                .collect(),
            stations: graph
                .stations()
                .map(|s| {
                    let children = s
                        .list_ids
                        .iter()
                        .map(|l| (l.clone(), graph.list(l).map_or(f64::NAN, |list| list.list_weight)))
                        .collect();
                    (s.id.clone(), children)
                })
                .collect(),
            enterprises: graph
                .enterprises()
                .map(|e| (e.id.clone(), e.station_ids.clone()))
                .collect(),
        }
    }
}

/// Score of one item at the end of `as_of`: events of the same calendar
/// month up to that day, sorted by (timestamp, event_id), folded from 100
/// with clamping after every step.
#[allow(clippy::manual_clamp)]
pub fn item_score(events: &[ScoreEvent], item_id: &str, as_of: NaiveDate) -> f64 {
    let mut mine: Vec<&ScoreEvent> = events
        .iter()
        .filter(|e| e.item_id == item_id)
        .filter(|e| {
            let d = e.timestamp.date_naive();
            d.year() == as_of.year() && d.month() == as_of.month() && d <= as_of
        })
        .collect();
    mine.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.event_id.cmp(&b.event_id)));
    let mut score = 100.0_f64;
    for e in mine {
        score += e.points;
        if score < 0.0 {
            score = 0.0;
        }
        if score > 100.0 {
            score = 100.0;
        }
    }
    score
}

fn weighted_mean(children: &[(Id, f64)], scores: &BTreeMap<Id, f64>) -> Option<f64> {
    if children.is_empty() {
        return None;
    }
    let mut total_weight = 0.0;
    for (_, w) in children {
        if !(*w > 0.0 && w.is_finite()) {
            return None;
        }
        total_weight += w;
    }
    let mut acc = 0.0;
    for (child, w) in children {
        acc += (w / total_weight) * scores.get(child)?;
    }
    Some(acc.clamp(0.0, 100.0))
}

/// Every level recomputed from scratch.
pub fn scores(topology: &Topology, events: &[ScoreEvent], as_of: NaiveDate) -> Scores {
    let mut out = Scores::default();
    for item in &topology.items {
        out.item_scores.insert(item.clone(), item_score(events, item, as_of));
    }
    for (list, children) in &topology.lists {
        if let Some(s) = weighted_mean(children, &out.item_scores) {
            out.list_scores.insert(list.clone(), s);
        }
    }
    for (station, children) in &topology.stations {
        if let Some(s) = weighted_mean(children, &out.list_scores) {
            out.station_scores.insert(station.clone(), s);
        }
    }
    for (enterprise, stations) in &topology.enterprises {
        if stations.is_empty() {
            continue;
        }
        let values: Option<Vec<f64>> = stations.iter().map(|s| out.station_scores.get(s).copied()).collect();
        if let Some(values) = values {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            out.enterprise_scores.insert(enterprise.clone(), mean.clamp(0.0, 100.0));
        }
    }
    out
}

/// Largest absolute difference between two score sets, or `None` when
/// they cover different subjects.
pub fn max_difference(a: &Scores, b: &Scores) -> Option<f64> {
    let mut worst = 0.0_f64;
    for (x, y) in [
        (&a.item_scores, &b.item_scores),
        (&a.list_scores, &b.list_scores),
        (&a.station_scores, &b.station_scores),
        (&a.enterprise_scores, &b.enterprise_scores),
    ] {
        if x.len() != y.len() {
            return None;
        }
        for (id, v) in x {
            worst = worst.max((v - y.get(id)?).abs());
        }
    }
    Some(worst)
}
