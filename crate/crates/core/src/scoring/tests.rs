use proptest::prelude::*;

use super::*;
use crate::domain::Graph;
use crate::oracle::{self, Topology};
use crate::testkit::{at, date, event, graph, single_item};

fn engine_with(g: &Graph, events: &[ScoreEvent]) -> ScoringEngine {
    let mut engine = ScoringEngine::new();
    for e in events {
        engine.apply_event(g, e.clone()).unwrap();
    }
    engine
}

/// Two items in one list with the given raw weights, each with its score
/// pushed down from 100 by a single deduction.
fn two_item_list(weights: [f64; 2], scores: [f64; 2]) -> f64 {
    let g = graph(&[vec![vec![(1.0, weights.to_vec())]]]);
    let events: Vec<ScoreEvent> = scores
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < 100.0)
        .map(|(i, s)| {
            event(
                &format!("e{i}"),
                &format!("E1-S1-L1-I{}", i + 1),
                at(2024, 1, 2, 9),
                s - 100.0,
            )
        })
        .collect();
    engine_with(&g, &events)
        .list_score(&g, "E1-S1-L1", date(2024, 1, 2))
        .unwrap()
}

#[test]
fn fresh_item_is_full() {
    let g = single_item(None);
    let engine = ScoringEngine::new();
    assert_eq!(engine.item_score(&g, "I", date(2024, 1, 15)).unwrap(), 100.0);
}

#[test]
fn mixed_events_fold_to_88() {
    let g = single_item(None);
    let events = [
        event("a", "I", at(2024, 1, 2, 8), -5.0),
        event("b", "I", at(2024, 1, 3, 8), -10.0),
        event("c", "I", at(2024, 1, 4, 8), 3.0),
    ];
    let engine = engine_with(&g, &events);
    assert_eq!(engine.item_score(&g, "I", date(2024, 1, 31)).unwrap(), 88.0);
    assert_eq!(oracle::item_score(&events, "I", date(2024, 1, 31)), 88.0);
}

#[test]
fn deductions_clamp_at_zero() {
    let g = single_item(None);
    let events: Vec<ScoreEvent> = (0..3)
        .map(|i| event(&format!("d{i}"), "I", at(2024, 1, 2, i), -50.0))
        .collect();
    let mut engine = engine_with(&g, &events);
    assert_eq!(engine.item_score(&g, "I", date(2024, 1, 2)).unwrap(), 0.0);
    let outcome = engine.apply_event(&g, event("x", "I", at(2024, 1, 3, 0), 4.0)).unwrap();
    assert_eq!(outcome.state.score, 4.0);
}

#[test]
fn award_clamps_at_full_score() {
    let g = single_item(None);
    let engine = engine_with(&g, &[event("a", "I", at(2024, 1, 2, 8), 7.0)]);
    assert_eq!(engine.item_score(&g, "I", date(2024, 1, 2)).unwrap(), 100.0);
}

#[test]
fn item_score_counts_events_up_to_the_end_of_the_day() {
    let g = single_item(None);
    let events = [
        event("a", "I", at(2024, 1, 3, 23), -5.0),
        event("b", "I", at(2024, 1, 7, 0), -10.0),
    ];
    let engine = engine_with(&g, &events);
    assert_eq!(engine.item_score(&g, "I", date(2024, 1, 2)).unwrap(), 100.0);
    assert_eq!(engine.item_score(&g, "I", date(2024, 1, 3)).unwrap(), 95.0);
    assert_eq!(engine.item_score(&g, "I", date(2024, 1, 30)).unwrap(), 85.0);
}

#[test]
fn scores_reset_at_month_start() {
    let g = single_item(None);
    let events = [
        event("a", "I", at(2024, 1, 31, 23), -30.0),
        event("b", "I", at(2024, 2, 1, 0), -5.0),
    ];
    let engine = engine_with(&g, &events);
    assert_eq!(engine.item_score(&g, "I", date(2024, 1, 31)).unwrap(), 70.0);
    assert_eq!(engine.item_score(&g, "I", date(2024, 2, 1)).unwrap(), 95.0);
    assert_eq!(engine.item_score(&g, "I", date(2024, 3, 1)).unwrap(), 100.0);
}

#[test]
fn unknown_item_is_rejected() {
    let g = single_item(None);
    let mut engine = ScoringEngine::new();
    assert_eq!(
        engine.apply_event(&g, event("a", "nope", at(2024, 1, 2, 8), -1.0)),
        Err(ScoreError::UnknownItem("nope".into()))
    );
    assert_eq!(
        engine.item_score(&g, "nope", date(2024, 1, 2)),
        Err(ScoreError::UnknownItem("nope".into()))
    );
}

#[test]
fn points_must_agree_with_kind() {
    let g = single_item(None);
    let mut engine = ScoringEngine::new();
    let mut bad = event("a", "I", at(2024, 1, 2, 8), -1.0);
    bad.kind = EventKind::Award;
    assert!(matches!(engine.apply_event(&g, bad), Err(ScoreError::InvalidEvent(_))));
    let mut bad = event("b", "I", at(2024, 1, 2, 8), 2.0);
    bad.kind = EventKind::Completion;
    assert!(matches!(engine.apply_event(&g, bad), Err(ScoreError::InvalidEvent(_))));
}

#[test]
fn duplicate_event_ids_are_no_ops() {
    let g = single_item(None);
    let mut engine = ScoringEngine::new();
    let first = engine
        .apply_event(&g, event("a", "I", at(2024, 1, 2, 8), -5.0))
        .unwrap();
    let again = engine
        .apply_event(&g, event("a", "I", at(2024, 1, 9, 8), -50.0))
        .unwrap();
    assert!(again.deduplicated);
    assert_eq!(again.state, first.state);
    assert_eq!(engine.event_count(), 1);
    assert_eq!(engine.item_score(&g, "I", date(2024, 1, 31)).unwrap(), 95.0);
}

#[test]
fn list_score_examples() {
    assert_eq!(two_item_list([0.5, 0.5], [80.0, 100.0]), 90.0);
    assert!((two_item_list([0.7, 0.3], [90.0, 100.0]) - 93.0).abs() < 1e-9);
    let g = single_item(None);
    let engine = engine_with(&g, &[event("a", "I", at(2024, 1, 2, 8), -27.0)]);
    assert_eq!(engine.list_score(&g, "L1", date(2024, 1, 2)).unwrap(), 73.0);
    assert_eq!(
        engine.list_score(&g, "L9", date(2024, 1, 2)),
        Err(ScoreError::UnknownList("L9".into()))
    );
}

#[test]
fn station_score_examples() {
    let g = graph(&[vec![vec![(1.0, vec![1.0]), (3.0, vec![1.0])]]]);
    let engine = engine_with(&g, &[event("a", "E1-S1-L2-I1", at(2024, 1, 2, 8), -20.0)]);
    assert_eq!(engine.station_score(&g, "E1-S1", date(2024, 1, 2)).unwrap(), 85.0);

    let g = single_item(None);
    let engine = engine_with(&g, &[event("a", "I", at(2024, 1, 2, 8), -12.5)]);
    let list = engine.list_score(&g, "L1", date(2024, 1, 2)).unwrap();
    assert_eq!(engine.station_score(&g, "S1", date(2024, 1, 2)).unwrap(), list);
}

#[test]
fn enterprise_is_the_mean_of_its_stations() {
    let g = graph(&[vec![vec![(1.0, vec![1.0])], vec![(1.0, vec![1.0])]]]);
    let engine = engine_with(&g, &[event("a", "E1-S1-L1-I1", at(2024, 1, 2, 8), -20.0)]);
    assert_eq!(engine.enterprise_score(&g, "E1", date(2024, 1, 2)).unwrap(), 90.0);
}

#[test]
fn subjects_without_children_are_not_scored() {
    let g = graph(&[vec![vec![]], vec![]]);
    let engine = ScoringEngine::new();
    assert_eq!(
        engine.station_score(&g, "E1-S1", date(2024, 1, 2)),
        Err(ScoreError::EmptyChildren("E1-S1".into()))
    );
    assert_eq!(
        engine.enterprise_score(&g, "E2", date(2024, 1, 2)),
        Err(ScoreError::EmptyChildren("E2".into()))
    );
    assert_eq!(
        engine.station_score(&g, "S9", date(2024, 1, 2)),
        Err(ScoreError::UnknownEntity("S9".into()))
    );
}

#[test]
fn closing_an_empty_day_records_full_scores() {
    let g = graph(&[vec![vec![(1.0, vec![1.0, 2.0])]]]);
    let mut engine = ScoringEngine::new();
    let snapshot = engine.close_day(&g, date(2024, 1, 1)).unwrap();
    let s = &snapshot.scores;
    for level in [&s.item_scores, &s.list_scores, &s.station_scores, &s.enterprise_scores] {
        assert!(!level.is_empty());
        assert!(level.values().all(|v| *v == 100.0));
    }
    assert!(snapshot.reasons.is_empty());
    assert_eq!(
        engine.close_day(&g, date(2024, 1, 1)),
        Err(ScoreError::AlreadyClosed(date(2024, 1, 1)))
    );
}

#[test]
fn closed_snapshot_lists_the_days_reasons() {
    let g = graph(&[vec![vec![(1.0, vec![1.0, 1.0])]]]);
    let events = [
        event("before", "E1-S1-L1-I2", at(2024, 1, 1, 23), -1.0),
        event("x", "E1-S1-L1-I1", at(2024, 1, 2, 10), -5.0),
    ];
    let mut engine = engine_with(&g, &events);
    let snapshot = engine.close_day(&g, date(2024, 1, 2)).unwrap();
    assert_eq!(
        snapshot.reasons,
        vec![Reason {
            item_id: "E1-S1-L1-I1".into(),
            points: -5.0,
            reason: "reason for x".into(),
        }]
    );
    let expected = oracle::scores(&Topology::of(&g), &events, date(2024, 1, 2));
    assert_eq!(oracle::max_difference(&expected, &snapshot.scores), Some(0.0));
    assert!(matches!(
        engine.apply_event(&g, event("late", "E1-S1-L1-I1", at(2024, 1, 2, 23), -1.0)),
        Err(ScoreError::LateEvent { .. })
    ));
}

#[test]
fn series_reads_snapshots() {
    let g = graph(&[vec![vec![(1.0, vec![1.0, 3.0]), (3.0, vec![2.0])]]]);
    let mut engine = ScoringEngine::new();
    for d in 1..=30 {
        if d == 10 {
            engine
                .apply_event(&g, event("hit", "E1-S1-L1-I1", at(2024, 1, 10, 12), -5.0))
                .unwrap();
        }
        engine.close_day(&g, date(2024, 1, d)).unwrap();
    }
    let series = engine
        .score_series(Level::Station, "E1-S1", date(2024, 1, 1), date(2024, 1, 30))
        .unwrap();
    assert_eq!(series.len(), 30);
    assert!(series.windows(2).all(|w| w[0].date < w[1].date));
    let drop = series[8].score - series[9].score;
    // item weight 1/4 within its list, list weight 1/4 within the station
    assert!((drop - 5.0 * 0.25 * 0.25).abs() < 1e-9, "{drop}");

    let one = engine
        .score_series(Level::Item, "E1-S1-L1-I1", date(2024, 1, 10), date(2024, 1, 10))
        .unwrap();
    assert_eq!(
        one,
        vec![SeriesPoint {
            date: date(2024, 1, 10),
            score: 95.0
        }]
    );

    assert_eq!(
        engine.score_series(Level::Station, "E1-S1", date(2024, 1, 30), date(2024, 1, 31)),
        Err(ScoreError::MissingSnapshot(date(2024, 1, 31)))
    );
    assert!(matches!(
        engine.score_series(Level::Station, "E1-S1", date(2024, 1, 3), date(2024, 1, 1)),
        Err(ScoreError::InvalidRange { .. })
    ));
    assert!(matches!(
        engine.score_series(Level::Station, "E1-S1", date(2023, 1, 1), date(2024, 1, 30)),
        Err(ScoreError::RangeTooLarge(_))
    ));
    assert!(matches!(
        engine.score_series(Level::List, "E1-S1", date(2024, 1, 1), date(2024, 1, 1)),
        Err(ScoreError::UnknownSubject { .. })
    ));
}

#[test]
fn series_is_unchanged_by_later_events() {
    let g = single_item(None);
    let mut engine = ScoringEngine::new();
    engine
        .apply_event(&g, event("a", "I", at(2024, 1, 1, 9), -3.0))
        .unwrap();
    engine.close_day(&g, date(2024, 1, 1)).unwrap();
    let before = engine
        .score_series(Level::Item, "I", date(2024, 1, 1), date(2024, 1, 1))
        .unwrap();
    engine
        .apply_event(&g, event("b", "I", at(2024, 1, 2, 9), -30.0))
        .unwrap();
    let after = engine
        .score_series(Level::Item, "I", date(2024, 1, 1), date(2024, 1, 1))
        .unwrap();
    assert_eq!(before[0].score.to_bits(), after[0].score.to_bits());
}

/// Three stations of one enterprise with one single-item list each.
fn three_stations(deductions: [f64; 3]) -> (Graph, Scores) {
    let station = || vec![(1.0, vec![1.0])];
    let g = graph(&[vec![station(), station(), station()]]);
    let events: Vec<ScoreEvent> = deductions
        .iter()
        .enumerate()
        .filter(|(_, d)| **d != 0.0)
        .map(|(i, d)| event(&format!("e{i}"), &format!("E1-S{}-L1-I1", i + 1), at(2024, 1, 2, 9), *d))
        .collect();
    let scores = engine_with(&g, &events).scores_as_of(&g, date(2024, 1, 2));
    (g, scores)
}

#[test]
fn reminder_examples() {
    let policy = BandPolicy::default();
    let (g, scores) = three_stations([0.0, 0.0, 0.0]);
    assert!(low_score_reminders(&g, &scores, &policy).unwrap().is_empty());

    let (g, scores) = three_stations([0.0, -40.0, 0.0]);
    let out = low_score_reminders(&g, &scores, &policy).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(
        (out[0].personnel_id.as_str(), out[0].subject_id.as_str(), out[0].score),
        ("P-E1-S2", "E1-S2", 60.0)
    );

    let (g, scores) = three_stations([-35.0, 0.0, -45.0]);
    let out = low_score_reminders(&g, &scores, &policy).unwrap();
    let ordered: Vec<f64> = out.iter().map(|n| n.score).collect();
    assert_eq!(ordered, vec![55.0, 65.0]);
    assert_eq!(out[0].personnel_id, "P-E1-S3");
}

#[test]
fn accountability_examples() {
    let policy = BandPolicy::default();
    let (g, scores) = three_stations([0.0, -30.0, 0.0]);
    assert!(accountability_report(&g, &scores, "E1", &policy).unwrap().is_empty());

    let (g, scores) = three_stations([0.0, -60.0, 0.0]);
    let rows = accountability_report(&g, &scores, "E1", &policy).unwrap();
    assert_eq!(
        rows,
        vec![AccountabilityRow {
            item_id: "E1-S2-L1-I1".into(),
            score: 40.0,
            station_id: "E1-S2".into(),
            leader_personnel_id: "P-E1-S1".into(),
        }]
    );

    let (g, scores) = three_stations([-45.0, -60.0, 0.0]);
    let rows = accountability_report(&g, &scores, "E1", &policy).unwrap();
    assert_eq!(rows.iter().map(|r| r.score).collect::<Vec<_>>(), vec![40.0, 55.0]);

    assert_eq!(
        accountability_report(&g, &scores, "E7", &policy),
        Err(ScoreError::UnknownEnterprise("E7".into()))
    );
}

#[test]
fn accountability_needs_a_leader() {
    let mut g = single_item(None);
    let mut value = serde_json::to_value(&g).unwrap();
    value["personnel"]["P1"]["role"] = serde_json::json!("staff");
    g = serde_json::from_value(value).unwrap();
    let scores = ScoringEngine::new().scores_as_of(&g, date(2024, 1, 1));
    assert_eq!(
        accountability_report(&g, &scores, "E1", &BandPolicy::default()),
        Err(ScoreError::NoLeader("E1".into()))
    );
}

// ---- properties ----

const ITEMS: [&str; 6] = [
    "E1-S1-L1-I1",
    "E1-S1-L1-I2",
    "E1-S1-L2-I1",
    "E1-S2-L1-I1",
    "E1-S2-L1-I2",
    "E1-S2-L1-I3",
];

fn prop_graph() -> Graph {
    graph(&[vec![
        vec![(2.0, vec![1.0, 3.0]), (1.0, vec![1.0])],
        vec![(1.0, vec![0.5, 0.25, 0.25])],
    ]])
}

fn arb_events(max: usize) -> impl Strategy<Value = Vec<ScoreEvent>> {
    prop::collection::vec((0..ITEMS.len(), 1..=28u32, 0..24u32, -60.0..20.0f64), 0..max).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(n, (item, day, hour, points))| {
                event(&format!("ev{n:03}"), ITEMS[item], at(2024, 1, day, hour), points)
            })
            .collect()
    })
}

fn within(value: f64, children: impl Iterator<Item = f64>) -> bool {
    let (lo, hi) = children.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)));
    value >= lo - 1e-9 && value <= hi + 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_prefix_stays_in_bounds(events in arb_events(40)) {
        let g = prop_graph();
        let mut engine = ScoringEngine::new();
        for e in events {
            let state = engine.apply_event(&g, e).unwrap().state;
            prop_assert!((0.0..=100.0).contains(&state.score));
            let scores = engine.scores_as_of(&g, date(2024, 1, 28));
            for level in [Level::Item, Level::List, Level::Station, Level::Enterprise] {
                prop_assert!(scores.level(level).values().all(|s| (0.0..=100.0).contains(s)));
            }
            for list in g.lists() {
                prop_assert!(within(scores.list_scores[&list.id], list.item_ids.iter().map(|i| scores.item_scores[i])));
            }
            for station in g.stations() {
                prop_assert!(within(scores.station_scores[&station.id], station.list_ids.iter().map(|l| scores.list_scores[l])));
            }
        }
    }

    #[test]
    fn ingestion_order_does_not_matter(events in arb_events(40), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let g = prop_graph();
        let mut sorted = events.clone();
        sorted.sort_by_key(|a| a.key());
        let mut shuffled = events.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = engine_with(&g, &sorted);
        let mut b = engine_with(&g, &shuffled);
        for e in events.iter().take(5) {
            prop_assert!(b.apply_event(&g, e.clone()).unwrap().deduplicated);
        }
        for d in 1..=28 {
            prop_assert_eq!(a.scores_as_of(&g, date(2024, 1, d)), b.scores_as_of(&g, date(2024, 1, d)));
        }
        prop_assert_eq!(a.events(), b.events());
    }

    #[test]
    fn deductions_never_raise_a_score(events in arb_events(30), item in 0..ITEMS.len(), day in 1..=28u32, points in -50.0..=0.0f64) {
        let g = prop_graph();
        let mut engine = engine_with(&g, &events);
        let before = engine.scores_as_of(&g, date(2024, 1, 28));
        engine.apply_event(&g, event("extra", ITEMS[item], at(2024, 1, day, 12), points)).unwrap();
        let after = engine.scores_as_of(&g, date(2024, 1, 28));
        for level in [Level::Item, Level::List, Level::Station, Level::Enterprise] {
            for (id, b) in before.level(level) {
                prop_assert!(after.level(level)[id] <= b + 1e-9);
            }
        }
    }

    #[test]
    fn engine_matches_the_oracle(events in arb_events(60), day in 1..=31u32) {
        let g = prop_graph();
        let engine = engine_with(&g, &events);
        let expected = oracle::scores(&Topology::of(&g), &events, date(2024, 1, day));
        let got = engine.scores_as_of(&g, date(2024, 1, day));
        prop_assert!(oracle::max_difference(&expected, &got).unwrap() <= 1e-9);
    }

    #[test]
    fn fold_matches_a_sequential_clamp(points in prop::collection::vec(-120.0..120.0f64, 0..50)) {
        let mut score = 100.0f64;
        for p in &points {
            score = (score + p).clamp(0.0, 100.0);
        }
        prop_assert_eq!(fold_scores(&points), score);
    }
}
