use serde::{Deserialize, Serialize};

use super::{BandPolicy, ScoreError, Scores};
use crate::domain::{Graph, Role};
use crate::ids::Id;

/// A low-score reminder addressed to a station's personnel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub personnel_id: Id,
    pub subject_id: Id,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountabilityRow {
    pub item_id: Id,
    pub score: f64,
    pub station_id: Id,
    pub leader_personnel_id: Id,
}

/// One reminder per station scoring under the policy threshold, lowest first.
pub fn low_score_reminders(
    graph: &Graph,
    scores: &Scores,
    policy: &BandPolicy,
) -> Result<Vec<Notification>, ScoreError> {
    policy.check()?;
    let mut out: Vec<Notification> = graph
        .stations()
        .filter_map(|station| {
            let score = *scores.station_scores.get(&station.id)?;
            (score < policy.reminder_threshold).then(|| Notification {
                personnel_id: station.personnel_id.clone(),
                subject_id: station.id.clone(),
                score,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then_with(|| a.subject_id.cmp(&b.subject_id))
    });
    Ok(out)
}

/// The enterprise's leader: the personnel of its first station whose
/// holder has the leader role.
pub fn enterprise_leader<'g>(graph: &'g Graph, enterprise_id: &str) -> Option<&'g Id> {
    graph
        .enterprise(enterprise_id)?
        .station_ids
        .iter()
        .filter_map(|s| graph.station(s))
        .find(|s| graph.person(&s.personnel_id).is_some_and(|p| p.role == Role::Leader))
        .map(|s| &s.personnel_id)
}

/// Items of an enterprise scoring under `yellow_min`, lowest first, each
/// routed to the enterprise leader.
pub fn accountability_report(
    graph: &Graph,
    scores: &Scores,
    enterprise_id: &str,
    policy: &BandPolicy,
) -> Result<Vec<AccountabilityRow>, ScoreError> {
    policy.check()?;
    if graph.enterprise(enterprise_id).is_none() {
        return Err(ScoreError::UnknownEnterprise(enterprise_id.into()));
    }
    let leader = enterprise_leader(graph, enterprise_id).ok_or_else(|| ScoreError::NoLeader(enterprise_id.into()))?;
    let mut rows: Vec<AccountabilityRow> = graph
        .enterprise_items(enterprise_id)
        .into_iter()
        .filter_map(|item| {
            let score = *scores.item_scores.get(&item.id)?;
            let station = graph.station_of_item(&item.id)?;
            (score < policy.yellow_min).then(|| AccountabilityRow {
                item_id: item.id.clone(),
                score,
                station_id: station.id.clone(),
                leader_personnel_id: leader.clone(),
            })
        })
        .collect();
    rows.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.item_id.cmp(&b.item_id)));
    Ok(rows)
}
