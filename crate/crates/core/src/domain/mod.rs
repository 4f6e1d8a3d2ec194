//! The responsibility hierarchy: service company → enterprise → station →
//! list → item, plus the personnel each station is assigned to.
//!
//! Weights are stored exactly as entered and normalized whenever they are
//! read, so the operator's raw input survives for audit.

mod graph;
mod template;
mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::Id;

pub use graph::{EntityKind, Graph, GraphCommand};
pub use template::{Template, TemplateItem, TemplateList, TemplateSet};
pub use validate::Violation;

/// Categories every graph starts with; more can be declared.
pub const DEFAULT_CATEGORIES: [&str; 3] = ["shopping_mall", "hazardous_chemicals", "other"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceCompany {
    pub id: Id,
    pub name: String,
    pub enterprise_ids: Vec<Id>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enterprise {
    pub id: Id,
    pub name: String,
    pub category: String,
    pub station_ids: Vec<Id>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: Id,
    pub name: String,
    pub personnel_id: Id,
    pub list_ids: Vec<Id>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Staff,
    Leader,
    Supervisor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Personnel {
    pub id: Id,
    pub name: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsibilityList {
    pub id: Id,
    pub station_id: Id,
    pub list_weight: f64,
    pub item_ids: Vec<Id>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsibilityItem {
    pub id: Id,
    pub list_id: Id,
    pub description: String,
    pub legal_basis: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic_rule: Option<PeriodicRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    FixedPenalty,
    PerDayPenalty,
}

/// Recurrence attached to an item: a duty every `cycle_days`, tolerated
/// `grace_days` late, penalized by `score_method` when missed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicRule {
    pub cycle_days: u32,
    #[serde(default)]
    pub grace_days: u32,
    pub score_method: ScoreMethod,
    pub penalty_points: f64,
}

impl PeriodicRule {
    pub fn check(&self) -> Result<(), String> {
        if self.cycle_days < 1 {
            return Err("cycle_days must be at least 1".into());
        }
        if !(self.penalty_points.is_finite() && self.penalty_points > 0.0) {
            return Err("penalty_points must be positive".into());
        }
        if self.penalty_points > 100.0 {
            return Err("penalty_points must not exceed 100".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    #[serde(default)]
    pub id: Option<Id>,
    pub description: String,
    #[serde(default)]
    pub legal_basis: String,
    pub weight: f64,
    #[serde(default)]
    pub periodic_rule: Option<PeriodicRule>,
}

/// Descriptor for a new entity. Ids are optional; the graph generates
/// them when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntitySpec {
    Company {
        #[serde(default)]
        id: Option<Id>,
        name: String,
    },
    Personnel {
        #[serde(default)]
        id: Option<Id>,
        name: String,
        role: Role,
    },
    Enterprise {
        #[serde(default)]
        id: Option<Id>,
        name: String,
        category: String,
    },
    Station {
        #[serde(default)]
        id: Option<Id>,
        name: String,
        personnel_id: Id,
    },
    /// A list must be created together with at least one item.
    List {
        #[serde(default)]
        id: Option<Id>,
        list_weight: f64,
        items: Vec<ItemSpec>,
    },
    Item(ItemSpec),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown parent `{0}`")]
    UnknownParent(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(Id),
    #[error("invalid {field}: {reason}")]
    InvalidSpec { field: String, reason: String },
    #[error("unknown entity `{0}`")]
    UnknownEntity(Id),
    #[error("unknown list `{0}`")]
    UnknownList(Id),
    #[error("list `{list_id}` has a non-positive weight")]
    NonPositiveWeight { list_id: Id },
    #[error("unknown template `{0}`")]
    UnknownTemplate(Id),
    #[error("template category `{template}` does not match enterprise category `{enterprise}`")]
    CategoryMismatch { template: String, enterprise: String },
    #[error("`{0}` still has children")]
    HasChildren(Id),
    #[error("`{id}` is still referenced by {by}")]
    HasDependents { id: Id, by: String },
}

impl GraphError {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        GraphError::InvalidSpec {
            field: field.to_owned(),
            reason: reason.into(),
        }
    }
}

/// Scales positive raw weights so they sum to one. Returns `None` when any
/// weight is non-positive or not finite, or when the vector is empty.
pub fn normalize(raw: &[f64]) -> Option<Vec<f64>> {
    if raw.is_empty() || raw.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return None;
    }
    let total: f64 = raw.iter().sum();
    if !total.is_finite() {
        return None;
    }
    Some(raw.iter().map(|w| w / total).collect())
}
