use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{normalize, Graph};
use crate::ids::Id;

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// One broken invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub entity_id: Id,
    pub invariant: String,
    pub detail: String,
}

impl Violation {
    fn new(entity_id: &Id, invariant: &str, detail: impl Into<String>) -> Self {
        Violation {
            entity_id: entity_id.clone(),
            invariant: invariant.to_owned(),
            detail: detail.into(),
        }
    }
}

impl Graph {
    /// Checks every structural invariant; an empty result means the graph
    /// is a well-formed tree with valid weights and references.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        // child id -> parents claiming it
        let mut claims: BTreeMap<&Id, Vec<&Id>> = BTreeMap::new();

        for company in self.companies.values() {
            for e in &company.enterprise_ids {
                if !self.enterprises.contains_key(e) {
                    out.push(Violation::new(
                        &company.id,
                        "dangling_reference",
                        format!("enterprise `{e}` does not exist"),
                    ));
                }
                claims.entry(e).or_default().push(&company.id);
            }
        }
        for enterprise in self.enterprises.values() {
            if !self.categories.contains(&enterprise.category) {
                out.push(Violation::new(
                    &enterprise.id,
                    "invalid_category",
                    format!("`{}` is not a declared category", enterprise.category),
                ));
            }
            for s in &enterprise.station_ids {
                if !self.stations.contains_key(s) {
                    out.push(Violation::new(
                        &enterprise.id,
                        "dangling_reference",
                        format!("station `{s}` does not exist"),
                    ));
                }
                claims.entry(s).or_default().push(&enterprise.id);
            }
        }
        for station in self.stations.values() {
            if !self.personnel.contains_key(&station.personnel_id) {
                out.push(Violation::new(
                    &station.id,
                    "dangling_reference",
                    format!("personnel `{}` does not exist", station.personnel_id),
                ));
            }
            for l in &station.list_ids {
                match self.lists.get(l) {
                    None => out.push(Violation::new(
                        &station.id,
                        "dangling_reference",
                        format!("list `{l}` does not exist"),
                    )),
                    Some(list) if list.station_id != station.id => out.push(Violation::new(
                        l,
                        "parent_mismatch",
                        format!("listed under `{}` but points at `{}`", station.id, list.station_id),
                    )),
                    Some(_) => {}
                }
                claims.entry(l).or_default().push(&station.id);
            }
            if !station.list_ids.is_empty() {
                let raw: Vec<f64> = station
                    .list_ids
                    .iter()
                    .filter_map(|l| self.lists.get(l))
                    .map(|l| l.list_weight)
                    .collect();
                check_weights(&station.id, "list weights", &raw, &mut out);
            }
        }
        for list in self.lists.values() {
            if list.item_ids.is_empty() {
                out.push(Violation::new(&list.id, "empty_list", "list has no items"));
            }
            for i in &list.item_ids {
                match self.items.get(i) {
                    None => out.push(Violation::new(
                        &list.id,
                        "dangling_reference",
                        format!("item `{i}` does not exist"),
                    )),
                    Some(item) if item.list_id != list.id => out.push(Violation::new(
                        i,
                        "parent_mismatch",
                        format!("listed under `{}` but points at `{}`", list.id, item.list_id),
                    )),
                    Some(_) => {}
                }
                claims.entry(i).or_default().push(&list.id);
            }
            if !list.item_ids.is_empty() {
                let raw: Vec<f64> = list
                    .item_ids
                    .iter()
                    .filter_map(|i| self.items.get(i))
                    .map(|i| i.weight)
                    .collect();
                check_weights(&list.id, "item weights", &raw, &mut out);
            }
        }
        for item in self.items.values() {
            if let Some(rule) = &item.periodic_rule {
                if let Err(reason) = rule.check() {
                    out.push(Violation::new(&item.id, "invalid_periodic_rule", reason));
                }
            }
        }

        let children = self
            .enterprises
            .keys()
            .chain(self.stations.keys())
            .chain(self.lists.keys())
            .chain(self.items.keys());
        for child in children {
            match claims.get(child).map_or(0, Vec::len) {
                0 => out.push(Violation::new(child, "orphan", "no parent claims this entity")),
                1 => {}
                n => out.push(Violation::new(
                    child,
                    "multiple_parents",
                    format!("claimed by {n} parents"),
                )),
            }
        }
        out
    }
}

fn check_weights(owner: &Id, what: &str, raw: &[f64], out: &mut Vec<Violation>) {
    if let Some(bad) = raw.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        out.push(Violation::new(
            owner,
            "weight_not_positive",
            format!("{what} include {bad}"),
        ));
        return;
    }
    match normalize(raw) {
        Some(weights) => {
            let sum: f64 = weights.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
                out.push(Violation::new(
                    owner,
                    "weights_not_normalized",
                    format!("{what} sum to {sum} after normalization"),
                ));
            }
        }
        None => out.push(Violation::new(
            owner,
            "weights_not_normalized",
            format!("{what} cannot be normalized"),
        )),
    }
}
