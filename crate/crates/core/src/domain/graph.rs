use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    normalize, Enterprise, EntitySpec, GraphError, ItemSpec, Personnel, ResponsibilityItem, ResponsibilityList,
    ServiceCompany, Station, Template, DEFAULT_CATEGORIES,
};
use crate::ids::Id;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Company,
    Personnel,
    Enterprise,
    Station,
    List,
    Item,
}

impl EntityKind {
    fn prefix(self) -> &'static str {
        match self {
            EntityKind::Company => "C",
            EntityKind::Personnel => "P",
            EntityKind::Enterprise => "E",
            EntityKind::Station => "S",
            EntityKind::List => "L",
            EntityKind::Item => "I",
        }
    }
}

/// A graph mutation as it is journaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GraphCommand {
    DeclareCategories {
        categories: Vec<String>,
    },
    AddEntity {
        #[serde(default)]
        parent_id: Option<Id>,
        spec: EntitySpec,
    },
    RemoveEntity {
        id: Id,
    },
    PutTemplate {
        template: Template,
    },
    DeriveLists {
        station_id: Id,
        template_id: Id,
    },
}

/// The entity tree. All ids are unique across every entity kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub(super) categories: BTreeSet<String>,
    pub(super) companies: BTreeMap<Id, ServiceCompany>,
    pub(super) personnel: BTreeMap<Id, Personnel>,
    pub(super) enterprises: BTreeMap<Id, Enterprise>,
    pub(super) stations: BTreeMap<Id, Station>,
    pub(super) lists: BTreeMap<Id, ResponsibilityList>,
    pub(super) items: BTreeMap<Id, ResponsibilityItem>,
    pub(super) templates: BTreeMap<Id, Template>,
    /// station → template → lists created from it
    pub(super) applications: BTreeMap<Id, BTreeMap<Id, Vec<Id>>>,
    counters: BTreeMap<String, u64>,
}

impl Default for Graph {
    fn default() -> Self {
        Graph {
            categories: DEFAULT_CATEGORIES.iter().map(|c| c.to_string()).collect(),
            companies: BTreeMap::new(),
            personnel: BTreeMap::new(),
            enterprises: BTreeMap::new(),
            stations: BTreeMap::new(),
            lists: BTreeMap::new(),
            items: BTreeMap::new(),
            templates: BTreeMap::new(),
            applications: BTreeMap::new(),
            counters: BTreeMap::new(),
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn categories(&self) -> &BTreeSet<String> {
        &self.categories
    }

    pub fn companies(&self) -> impl Iterator<Item = &ServiceCompany> {
        self.companies.values()
    }

    pub fn enterprises(&self) -> impl Iterator<Item = &Enterprise> {
        self.enterprises.values()
    }

    pub fn stations(&self) -> impl Iterator<Item = &Station> {
        self.stations.values()
    }

    pub fn lists(&self) -> impl Iterator<Item = &ResponsibilityList> {
        self.lists.values()
    }

    pub fn items(&self) -> impl Iterator<Item = &ResponsibilityItem> {
        self.items.values()
    }

    pub fn all_personnel(&self) -> impl Iterator<Item = &Personnel> {
        self.personnel.values()
    }

    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        self.templates.values()
    }

    pub fn company(&self, id: &str) -> Option<&ServiceCompany> {
        self.companies.get(id)
    }

    pub fn enterprise(&self, id: &str) -> Option<&Enterprise> {
        self.enterprises.get(id)
    }

    pub fn station(&self, id: &str) -> Option<&Station> {
        self.stations.get(id)
    }

    pub fn person(&self, id: &str) -> Option<&Personnel> {
        self.personnel.get(id)
    }

    pub fn list(&self, id: &str) -> Option<&ResponsibilityList> {
        self.lists.get(id)
    }

    pub fn item(&self, id: &str) -> Option<&ResponsibilityItem> {
        self.items.get(id)
    }

    pub fn template(&self, id: &str) -> Option<&Template> {
        self.templates.get(id)
    }

    pub fn kind_of(&self, id: &str) -> Option<EntityKind> {
        if self.companies.contains_key(id) {
            Some(EntityKind::Company)
        } else if self.personnel.contains_key(id) {
            Some(EntityKind::Personnel)
        } else if self.enterprises.contains_key(id) {
            Some(EntityKind::Enterprise)
        } else if self.stations.contains_key(id) {
            Some(EntityKind::Station)
        } else if self.lists.contains_key(id) {
            Some(EntityKind::List)
        } else if self.items.contains_key(id) {
            Some(EntityKind::Item)
        } else {
            None
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.kind_of(id).is_some()
    }

    pub fn enterprise_of_station(&self, station_id: &str) -> Option<&Enterprise> {
        self.enterprises
            .values()
            .find(|e| e.station_ids.iter().any(|s| s == station_id))
    }

    pub fn company_of_enterprise(&self, enterprise_id: &str) -> Option<&ServiceCompany> {
        self.companies
            .values()
            .find(|c| c.enterprise_ids.iter().any(|e| e == enterprise_id))
    }

    /// Station owning an item, via its list.
    pub fn station_of_item(&self, item_id: &str) -> Option<&Station> {
        let item = self.items.get(item_id)?;
        let list = self.lists.get(&item.list_id)?;
        self.stations.get(&list.station_id)
    }

    /// Items of every list of every station of an enterprise, in tree order.
    pub fn enterprise_items(&self, enterprise_id: &str) -> Vec<&ResponsibilityItem> {
        let Some(enterprise) = self.enterprises.get(enterprise_id) else {
            return Vec::new();
        };
        enterprise
            .station_ids
            .iter()
            .filter_map(|s| self.stations.get(s))
            .flat_map(|s| s.list_ids.iter())
            .filter_map(|l| self.lists.get(l))
            .flat_map(|l| l.item_ids.iter())
            .filter_map(|i| self.items.get(i))
            .collect()
    }

    /// Normalized item weights of a list, in item order.
    pub fn normalize_weights(&self, list_id: &str) -> Result<Vec<f64>, GraphError> {
        let list = self
            .lists
            .get(list_id)
            .ok_or_else(|| GraphError::UnknownList(list_id.into()))?;
        let raw: Vec<f64> = list
            .item_ids
            .iter()
            .map(|i| self.items.get(i).map_or(f64::NAN, |item| item.weight))
            .collect();
        normalize(&raw).ok_or_else(|| GraphError::NonPositiveWeight {
            list_id: list.id.clone(),
        })
    }

    /// Normalized list weights of a station, in list order.
    pub fn normalize_list_weights(&self, station_id: &str) -> Result<Vec<f64>, GraphError> {
        let station = self
            .stations
            .get(station_id)
            .ok_or_else(|| GraphError::UnknownEntity(station_id.into()))?;
        let raw: Vec<f64> = station
            .list_ids
            .iter()
            .map(|l| self.lists.get(l).map_or(f64::NAN, |list| list.list_weight))
            .collect();
        normalize(&raw).ok_or_else(|| GraphError::NonPositiveWeight {
            list_id: station.id.clone(),
        })
    }

    pub fn apply(&mut self, command: &GraphCommand) -> Result<Vec<Id>, GraphError> {
        match command {
            GraphCommand::DeclareCategories { categories } => {
                self.declare_categories(categories)?;
                Ok(Vec::new())
            }
            GraphCommand::AddEntity { parent_id, spec } => self
                .add_entity(parent_id.as_ref().map(Id::as_str), spec.clone())
                .map(|id| vec![id]),
            GraphCommand::RemoveEntity { id } => {
                self.remove_entity(id)?;
                Ok(Vec::new())
            }
            GraphCommand::PutTemplate { template } => {
                self.put_template(template.clone())?;
                Ok(vec![template.id.clone()])
            }
            GraphCommand::DeriveLists {
                station_id,
                template_id,
            } => self.derive_station_lists(station_id, template_id),
        }
    }

    pub fn declare_categories(&mut self, categories: &[String]) -> Result<(), GraphError> {
        if let Some(bad) = categories.iter().find(|c| c.trim().is_empty()) {
            return Err(GraphError::invalid("category", format!("`{bad}` is blank")));
        }
        self.categories.extend(categories.iter().cloned());
        Ok(())
    }

    /// Adds an entity beneath `parent_id` (companies and personnel take no
    /// parent) and returns its id.
    pub fn add_entity(&mut self, parent_id: Option<&str>, spec: EntitySpec) -> Result<Id, GraphError> {
        match spec {
            EntitySpec::Company { id, name } => {
                reject_parent(parent_id)?;
                let id = self.claim_id(id, EntityKind::Company)?;
                self.companies.insert(
                    id.clone(),
                    ServiceCompany {
                        id: id.clone(),
                        name,
                        enterprise_ids: Vec::new(),
                    },
                );
                Ok(id)
            }
            EntitySpec::Personnel { id, name, role } => {
                reject_parent(parent_id)?;
                let id = self.claim_id(id, EntityKind::Personnel)?;
                self.personnel.insert(
                    id.clone(),
                    Personnel {
                        id: id.clone(),
                        name,
                        role,
                    },
                );
                Ok(id)
            }
            EntitySpec::Enterprise { id, name, category } => {
                let parent = self.require_parent(parent_id, EntityKind::Company)?;
                if !self.categories.contains(&category) {
                    return Err(GraphError::invalid(
                        "category",
                        format!("`{category}` is not a declared category"),
                    ));
                }
                let id = self.claim_id(id, EntityKind::Enterprise)?;
                self.enterprises.insert(
                    id.clone(),
                    Enterprise {
                        id: id.clone(),
                        name,
                        category,
                        station_ids: Vec::new(),
                    },
                );
                self.companies
                    .get_mut(&parent)
                    .expect("parent checked")
                    .enterprise_ids
                    .push(id.clone());
                Ok(id)
            }
            EntitySpec::Station { id, name, personnel_id } => {
                let parent = self.require_parent(parent_id, EntityKind::Enterprise)?;
                if !self.personnel.contains_key(&personnel_id) {
                    return Err(GraphError::invalid(
                        "personnel_id",
                        format!("no personnel `{personnel_id}`"),
                    ));
                }
                let id = self.claim_id(id, EntityKind::Station)?;
                self.stations.insert(
                    id.clone(),
                    Station {
                        id: id.clone(),
                        name,
                        personnel_id,
                        list_ids: Vec::new(),
                    },
                );
                self.enterprises
                    .get_mut(&parent)
                    .expect("parent checked")
                    .station_ids
                    .push(id.clone());
                Ok(id)
            }
            EntitySpec::List { id, list_weight, items } => {
                let parent = self.require_parent(parent_id, EntityKind::Station)?;
                check_weight("list_weight", list_weight)?;
                if items.is_empty() {
                    return Err(GraphError::invalid("items", "a list needs at least one item"));
                }
                for item in &items {
                    check_item(item)?;
                }
                self.check_fresh_ids(id.iter().chain(items.iter().filter_map(|i| i.id.as_ref())))?;
                let list_id = self.claim_id(id, EntityKind::List)?;
                self.lists.insert(
                    list_id.clone(),
                    ResponsibilityList {
                        id: list_id.clone(),
                        station_id: parent.clone(),
                        list_weight,
                        item_ids: Vec::new(),
                    },
                );
                self.stations
                    .get_mut(&parent)
                    .expect("parent checked")
                    .list_ids
                    .push(list_id.clone());
                for item in items {
                    self.insert_item(&list_id, item)?;
                }
                Ok(list_id)
            }
            EntitySpec::Item(item) => {
                let parent = self.require_parent(parent_id, EntityKind::List)?;
                check_item(&item)?;
                self.insert_item(&parent, item)
            }
        }
    }

    /// Removes a leaf entity. Entities with children are never cascaded.
    /// Personnel may be removed while stations still reference them; the
    /// dangling reference then shows up in `validate`.
    pub fn remove_entity(&mut self, id: &str) -> Result<(), GraphError> {
        let kind = self.kind_of(id).ok_or_else(|| GraphError::UnknownEntity(id.into()))?;
        let has_children = match kind {
            EntityKind::Company => !self.companies[id].enterprise_ids.is_empty(),
            EntityKind::Enterprise => !self.enterprises[id].station_ids.is_empty(),
            EntityKind::Station => !self.stations[id].list_ids.is_empty(),
            EntityKind::List => !self.lists[id].item_ids.is_empty(),
            EntityKind::Personnel | EntityKind::Item => false,
        };
        if has_children {
            return Err(GraphError::HasChildren(id.into()));
        }
        match kind {
            EntityKind::Company => {
                self.companies.remove(id);
            }
            EntityKind::Personnel => {
                self.personnel.remove(id);
            }
            EntityKind::Enterprise => {
                self.enterprises.remove(id);
                for company in self.companies.values_mut() {
                    company.enterprise_ids.retain(|e| e != id);
                }
            }
            EntityKind::Station => {
                self.stations.remove(id);
                self.applications.remove(id);
                for enterprise in self.enterprises.values_mut() {
                    enterprise.station_ids.retain(|s| s != id);
                }
            }
            EntityKind::List => {
                let list = self.lists.remove(id).expect("kind checked");
                if let Some(station) = self.stations.get_mut(&list.station_id) {
                    station.list_ids.retain(|l| l != id);
                }
                if let Some(applied) = self.applications.get_mut(&list.station_id) {
                    applied.retain(|_, lists| !lists.iter().any(|l| l == id));
                }
            }
            EntityKind::Item => {
                let item = self.items.remove(id).expect("kind checked");
                if let Some(list) = self.lists.get_mut(&item.list_id) {
                    list.item_ids.retain(|i| i != id);
                }
            }
        }
        Ok(())
    }

    /// Registers a template. Re-submitting an identical template is a no-op;
    /// each category carries at most one template.
    pub fn put_template(&mut self, template: Template) -> Result<(), GraphError> {
        template.check(&self.categories)?;
        if let Some(existing) = self.templates.get(&template.id) {
            return if *existing == template {
                Ok(())
            } else {
                Err(GraphError::DuplicateId(template.id))
            };
        }
        if let Some(other) = self.templates.values().find(|t| t.category == template.category) {
            return Err(GraphError::invalid(
                "category",
                format!("template `{}` already covers `{}`", other.id, other.category),
            ));
        }
        self.templates.insert(template.id.clone(), template);
        Ok(())
    }

    /// Instantiates a template's lists on a station. Applying the same
    /// template to the same station again returns the original list ids.
    pub fn derive_station_lists(&mut self, station_id: &str, template_id: &str) -> Result<Vec<Id>, GraphError> {
        let template = self
            .templates
            .get(template_id)
            .cloned()
            .ok_or_else(|| GraphError::UnknownTemplate(template_id.into()))?;
        if !self.stations.contains_key(station_id) {
            return Err(GraphError::UnknownEntity(station_id.into()));
        }
        let enterprise = self
            .enterprise_of_station(station_id)
            .ok_or_else(|| GraphError::UnknownParent(station_id.into()))?;
        if enterprise.category != template.category {
            return Err(GraphError::CategoryMismatch {
                template: template.category.clone(),
                enterprise: enterprise.category.clone(),
            });
        }
        if let Some(ids) = self.applications.get(station_id).and_then(|a| a.get(template_id)) {
            return Ok(ids.clone());
        }
        let mut created = Vec::with_capacity(template.lists.len());
        for list in &template.lists {
            let spec = EntitySpec::List {
                id: None,
                list_weight: list.list_weight,
                items: list
                    .items
                    .iter()
                    .map(|item| ItemSpec {
                        id: None,
                        description: item.description.clone(),
                        legal_basis: item.legal_basis.clone(),
                        weight: item.weight,
                        periodic_rule: item.periodic_rule,
                    })
                    .collect(),
            };
            created.push(self.add_entity(Some(station_id), spec)?);
        }
        self.applications
            .entry(station_id.into())
            .or_default()
            .insert(template_id.into(), created.clone());
        Ok(created)
    }

    fn insert_item(&mut self, list_id: &Id, spec: ItemSpec) -> Result<Id, GraphError> {
        let id = self.claim_id(spec.id, EntityKind::Item)?;
        self.items.insert(
            id.clone(),
            ResponsibilityItem {
                id: id.clone(),
                list_id: list_id.clone(),
                description: spec.description,
                legal_basis: spec.legal_basis,
                weight: spec.weight,
                periodic_rule: spec.periodic_rule,
            },
        );
        self.lists
            .get_mut(list_id)
            .expect("list exists")
            .item_ids
            .push(id.clone());
        Ok(id)
    }

    fn require_parent(&self, parent_id: Option<&str>, kind: EntityKind) -> Result<Id, GraphError> {
        let parent = parent_id.ok_or_else(|| GraphError::UnknownParent(String::new()))?;
        if self.kind_of(parent) == Some(kind) {
            Ok(parent.into())
        } else {
            Err(GraphError::UnknownParent(parent.to_owned()))
        }
    }

    fn check_fresh_ids<'a>(&self, ids: impl Iterator<Item = &'a Id>) -> Result<(), GraphError> {
        let mut seen = BTreeSet::new();
        for id in ids {
            if id.is_empty() {
                return Err(GraphError::invalid("id", "must not be empty"));
            }
            if self.contains(id) || !seen.insert(id) {
                return Err(GraphError::DuplicateId(id.clone()));
            }
        }
        Ok(())
    }

    fn claim_id(&mut self, requested: Option<Id>, kind: EntityKind) -> Result<Id, GraphError> {
        if let Some(id) = requested {
            self.check_fresh_ids(std::iter::once(&id))?;
            return Ok(id);
        }
        let counter = self.counters.entry(kind.prefix().to_owned()).or_insert(0);
        loop {
            *counter += 1;
            let candidate = Id::new(format!("{}{}", kind.prefix(), counter));
            let taken = self.companies.contains_key(&candidate)
                || self.personnel.contains_key(&candidate)
                || self.enterprises.contains_key(&candidate)
                || self.stations.contains_key(&candidate)
                || self.lists.contains_key(&candidate)
                || self.items.contains_key(&candidate);
            if !taken {
                return Ok(candidate);
            }
        }
    }
}

fn reject_parent(parent_id: Option<&str>) -> Result<(), GraphError> {
    match parent_id {
        Some(p) => Err(GraphError::invalid(
            "parent_id",
            format!("top-level entity takes no parent, got `{p}`"),
        )),
        None => Ok(()),
    }
}

pub(super) fn check_weight(field: &str, weight: f64) -> Result<(), GraphError> {
    if weight.is_finite() && weight > 0.0 {
        Ok(())
    } else {
        Err(GraphError::invalid(
            field,
            format!("must be strictly positive, got {weight}"),
        ))
    }
}

fn check_item(item: &ItemSpec) -> Result<(), GraphError> {
    check_weight("weight", item.weight)?;
    if let Some(rule) = &item.periodic_rule {
        rule.check()
            .map_err(|reason| GraphError::invalid("periodic_rule", reason))?;
    }
    Ok(())
}
