use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::check_weight;
use super::{GraphError, PeriodicRule, DEFAULT_CATEGORIES};
use crate::ids::Id;

/// Station lists prescribed for one enterprise category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub id: Id,
    pub category: String,
    pub lists: Vec<TemplateList>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateList {
    #[serde(default)]
    pub name: String,
    pub list_weight: f64,
    pub items: Vec<TemplateItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateItem {
    pub description: String,
    #[serde(default)]
    pub legal_basis: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic_rule: Option<PeriodicRule>,
}

impl Template {
    pub(super) fn check(&self, categories: &BTreeSet<String>) -> Result<(), GraphError> {
        if self.id.is_empty() {
            return Err(GraphError::invalid("id", "must not be empty"));
        }
        if !categories.contains(&self.category) {
            return Err(GraphError::invalid(
                "category",
                format!("`{}` is not a declared category", self.category),
            ));
        }
        if self.lists.is_empty() {
            return Err(GraphError::invalid("lists", "a template needs at least one list"));
        }
        for list in &self.lists {
            check_weight("list_weight", list.list_weight)?;
            if list.items.is_empty() {
                return Err(GraphError::invalid("items", "a list needs at least one item"));
            }
            for item in &list.items {
                check_weight("weight", item.weight)?;
                if let Some(rule) = &item.periodic_rule {
                    rule.check()
                        .map_err(|reason| GraphError::invalid("periodic_rule", reason))?;
                }
            }
        }
        Ok(())
    }
}

/// Contents of a `--templates` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    /// Extra categories on top of the defaults.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    pub templates: Vec<Template>,
}

/// A template file problem, located by line.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateFileError {
    pub line: usize,
    pub error: GraphError,
}

impl fmt::Display for TemplateFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.error)
    }
}

impl std::error::Error for TemplateFileError {}

impl TemplateSet {
    /// Parses and checks a template file. Semantic errors are attributed to
    /// the line where the offending template's `id` appears.
    pub fn parse(text: &str) -> Result<Self, TemplateFileError> {
        let set: TemplateSet = serde_json::from_str(text).map_err(|e| TemplateFileError {
            line: e.line(),
            error: GraphError::invalid("json", e.to_string()),
        })?;
        let categories = set.all_categories();
        let mut ids = BTreeSet::new();
        for template in &set.templates {
            let located = |error| TemplateFileError {
                line: locate(text, &template.id, &template.category, &error),
                error,
            };
            if !ids.insert(&template.id) {
                return Err(located(GraphError::DuplicateId(template.id.clone())));
            }
            template.check(&categories).map_err(located)?;
        }
        Ok(set)
    }

    pub fn all_categories(&self) -> BTreeSet<String> {
        DEFAULT_CATEGORIES
            .iter()
            .map(|c| c.to_string())
            .chain(self.categories.iter().cloned())
            .collect()
    }
}

fn locate(text: &str, id: &Id, category: &str, error: &GraphError) -> usize {
    let id_needle = format!("\"{id}\"");
    let id_line = text.lines().position(|l| l.contains(&id_needle)).map_or(1, |p| p + 1);
    if let GraphError::InvalidSpec { field, .. } = error {
        if field == "category" {
            let needle = format!("\"{category}\"");
            if let Some(p) = text
                .lines()
                .enumerate()
                .skip(id_line - 1)
                .find(|(_, l)| l.contains(&needle))
            {
                return p.0 + 1;
            }
        }
    }
    id_line
}
