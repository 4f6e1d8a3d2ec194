//! Recomputes every stored snapshot from the raw ledger with the
//! brute-force oracle.

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Graph, GraphError};
use crate::ids::Id;
use crate::oracle::{self, Topology};
use crate::scoring::{Level, Reason, ScoreEvent, Scores};
use crate::store::{self, StoreError};
use crate::system::{ControlEntry, SystemCommand};

pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("corrupt ledger {path} at line {line}: {message}")]
    CorruptLedger {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("graph log record {seq} does not apply: {source}")]
    Graph {
        seq: u64,
        #[source]
        source: GraphError,
    },
}

/// First place where a stored snapshot disagrees with the recomputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub date: NaiveDate,
    /// `item`, `list`, `station`, `enterprise`, `reasons` or `snapshot`.
    pub what: String,
    pub subject: Option<Id>,
    pub expected: Option<f64>,
    pub found: Option<f64>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.date, self.what)?;
        if let Some(subject) = &self.subject {
            write!(f, " `{subject}`")?;
        }
        match (self.expected, self.found) {
            (Some(e), Some(v)) => write!(f, ": expected {e}, found {v}"),
            (Some(e), None) => write!(f, ": expected {e}, missing from snapshot"),
            (None, Some(v)) => write!(f, ": unexpected value {v}"),
            (None, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ledger: PathBuf,
    pub events: usize,
    pub days_checked: usize,
    pub divergence: Option<Divergence>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Checks every closed day of the data directory holding `ledger_path`.
pub fn verify(ledger_path: &Path) -> Result<VerifyReport, VerifyError> {
    let dir = ledger_path.parent().unwrap_or(Path::new("."));
    let ledger = store::read_log::<ScoreEvent>(ledger_path).map_err(|e| match e {
        StoreError::Corrupt { path, line, message } => VerifyError::CorruptLedger { path, line, message },
        other => other.into(),
    })?;
    let control = store::read_log::<ControlEntry>(&dir.join(store::GRAPH_LOG))?;

    let mut report = VerifyReport {
        ledger: ledger_path.to_owned(),
        events: ledger.len(),
        days_checked: 0,
        divergence: None,
    };
    let mut graph = Graph::new();
    for record in control {
        match record.body {
            ControlEntry::Graph(command) => {
                graph.apply(&command).map_err(|source| VerifyError::Graph {
                    seq: record.seq,
                    source,
                })?;
            }
            ControlEntry::System(SystemCommand::CloseDay { date }) => {
                let events: Vec<ScoreEvent> = ledger
                    .iter()
                    .filter(|r| r.seq < record.seq)
                    .map(|r| r.body.clone())
                    .collect();
                report.days_checked += 1;
                if let Some(d) = check_day(dir, &graph, &events, date)? {
                    report.divergence = Some(d);
                    return Ok(report);
                }
            }
            ControlEntry::System(_) => {}
        }
    }
    Ok(report)
}

fn check_day(
    dir: &Path,
    graph: &Graph,
    events: &[ScoreEvent],
    date: NaiveDate,
) -> Result<Option<Divergence>, VerifyError> {
    let Some(snapshot) = store::read_snapshot(dir, date)? else {
        return Ok(Some(Divergence {
            date,
            what: "snapshot".into(),
            subject: None,
            expected: None,
            found: None,
        }));
    };
    let expected = oracle::scores(&Topology::of(graph), events, date);
    for level in [Level::Item, Level::List, Level::Station, Level::Enterprise] {
        if let Some(d) = compare_level(date, level, &expected, &snapshot.scores) {
            return Ok(Some(d));
        }
    }
    let mut day: Vec<&ScoreEvent> = events.iter().filter(|e| e.timestamp.date_naive() == date).collect();
    day.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.event_id.cmp(&b.event_id)));
    let reasons: Vec<Reason> = day
        .into_iter()
        .map(|e| Reason {
            item_id: e.item_id.clone(),
            points: e.points,
            reason: e.reason.clone(),
        })
        .collect();
    if reasons != snapshot.reasons {
        let at = reasons
            .iter()
            .zip(&snapshot.reasons)
            .position(|(a, b)| a != b)
            .unwrap_or(reasons.len().min(snapshot.reasons.len()));
        return Ok(Some(Divergence {
            date,
            what: "reasons".into(),
            subject: reasons.get(at).or(snapshot.reasons.get(at)).map(|r| r.item_id.clone()),
            expected: reasons.get(at).map(|r| r.points),
            found: snapshot.reasons.get(at).map(|r| r.points),
        }));
    }
    Ok(None)
}

fn compare_level(date: NaiveDate, level: Level, expected: &Scores, found: &Scores) -> Option<Divergence> {
    let (want, have) = (expected.level(level), found.level(level));
    let diverge = |subject: &Id, e: Option<f64>, f: Option<f64>| Divergence {
        date,
        what: level.to_string(),
        subject: Some(subject.clone()),
        expected: e,
        found: f,
    };
    for (id, e) in want {
        match have.get(id) {
            Some(f) if (e - f).abs() <= TOLERANCE => {}
            other => return Some(diverge(id, Some(*e), other.copied())),
        }
    }
    have.iter()
        .find(|(id, _)| !want.contains_key(*id))
        .map(|(id, f)| diverge(id, None, Some(*f)))
}
