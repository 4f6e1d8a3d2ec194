//! Built-in templates and the demo responsibility network.

use crate::domain::{
    EntitySpec, Graph, GraphCommand, PeriodicRule, Role, ScoreMethod, Template, TemplateItem, TemplateList, TemplateSet,
};
use crate::ids::Id;
use crate::telemetry::{Comparator, DeductionMode, ThresholdRule};

/// Company id of the demo network; its presence means "already seeded".
pub const DEMO_COMPANY: &str = "C1";

fn item(description: &str, legal_basis: &str, weight: f64, periodic_rule: Option<PeriodicRule>) -> TemplateItem {
    TemplateItem {
        description: description.into(),
        legal_basis: legal_basis.into(),
        weight,
        periodic_rule,
    }
}

fn every(cycle_days: u32, grace_days: u32, score_method: ScoreMethod, penalty_points: f64) -> Option<PeriodicRule> {
    Some(PeriodicRule {
        cycle_days,
        grace_days,
        score_method,
        penalty_points,
    })
}

pub fn default_templates() -> TemplateSet {
    use ScoreMethod::{FixedPenalty, PerDayPenalty};
    TemplateSet {
        categories: Vec::new(),
        templates: vec![
            Template {
                id: "T-mall".into(),
                category: "shopping_mall".into(),
                lists: vec![
                    TemplateList {
                        name: "Fire equipment upkeep".into(),
                        list_weight: 0.6,
                        items: vec![
                            item(
                                "Inspect portable extinguishers",
                                "fire code: equipment inspection",
                                3.0,
                                every(7, 1, FixedPenalty, 10.0),
                            ),
                            item(
                                "Test the fire alarm host",
                                "fire code: alarm systems",
                                2.0,
                                every(14, 0, PerDayPenalty, 2.0),
                            ),
                            item("Keep evacuation routes clear", "fire code: means of egress", 5.0, None),
                        ],
                    },
                    TemplateList {
                        name: "Training and drills".into(),
                        list_weight: 0.4,
                        items: vec![
                            item("Staff fire-safety training", "fire code: personnel training", 1.0, None),
                            item(
                                "Evacuation drill",
                                "fire code: drills",
                                1.0,
                                every(30, 2, FixedPenalty, 15.0),
                            ),
                        ],
                    },
                ],
            },
            Template {
                id: "T-chem".into(),
                category: "hazardous_chemicals".into(),
                lists: vec![
                    TemplateList {
                        name: "Storage safety".into(),
                        list_weight: 0.7,
                        items: vec![
                            item(
                                "Review tank pressure logs",
                                "hazmat storage rules",
                                4.0,
                                every(7, 0, PerDayPenalty, 3.0),
                            ),
                            item("Verify gas detectors", "hazmat storage rules", 3.0, None),
                            item("Check hazard labeling", "hazmat labeling rules", 3.0, None),
                        ],
                    },
                    TemplateList {
                        name: "Emergency readiness".into(),
                        list_weight: 0.3,
                        items: vec![
                            item(
                                "Review the emergency plan",
                                "emergency response rules",
                                1.0,
                                every(14, 1, FixedPenalty, 10.0),
                            ),
                            item("Audit spill kit inventory", "emergency response rules", 1.0, None),
                        ],
                    },
                ],
            },
            Template {
                id: "T-other".into(),
                category: "other".into(),
                lists: vec![TemplateList {
                    name: "General duties".into(),
                    list_weight: 1.0,
                    items: vec![
                        item(
                            "Daily safety patrol",
                            "fire code: general duties",
                            1.0,
                            every(1, 0, FixedPenalty, 2.0),
                        ),
                        item("Review hazard reports", "fire code: general duties", 1.0, None),
                    ],
                }],
            },
        ],
    }
}

fn add(parent: Option<&str>, spec: EntitySpec) -> GraphCommand {
    GraphCommand::AddEntity {
        parent_id: parent.map(Id::from),
        spec,
    }
}

fn person(id: &str, name: &str, role: Role) -> GraphCommand {
    add(
        None,
        EntitySpec::Personnel {
            id: Some(id.into()),
            name: name.into(),
            role,
        },
    )
}

fn station(enterprise: &str, id: &str, name: &str, personnel: &str) -> GraphCommand {
    add(
        Some(enterprise),
        EntitySpec::Station {
            id: Some(id.into()),
            name: name.into(),
            personnel_id: personnel.into(),
        },
    )
}

/// Commands building the demo network: one company, a shopping mall with
/// two stations and a chemical plant with one, lists derived from the
/// category templates in `templates`.
pub fn demo_commands(templates: &TemplateSet) -> Vec<GraphCommand> {
    let mut commands = Vec::new();
    let extra: Vec<String> = templates.categories.clone();
    if !extra.is_empty() {
        commands.push(GraphCommand::DeclareCategories { categories: extra });
    }
    commands.extend(
        templates
            .templates
            .iter()
            .map(|t| GraphCommand::PutTemplate { template: t.clone() }),
    );
    commands.extend([
        add(
            None,
            EntitySpec::Company {
                id: Some(DEMO_COMPANY.into()),
                name: "Harbor Fire Safety Services".into(),
            },
        ),
        person("P1", "Lin Wei", Role::Leader),
        person("P2", "Zhao Min", Role::Staff),
        person("P3", "Chen Jie", Role::Leader),
        person("P4", "Wang Fang", Role::Supervisor),
        add(
            Some(DEMO_COMPANY),
            EntitySpec::Enterprise {
                id: Some("E1".into()),
                name: "Riverside Mall".into(),
                category: "shopping_mall".into(),
            },
        ),
        add(
            Some(DEMO_COMPANY),
            EntitySpec::Enterprise {
                id: Some("E2".into()),
                name: "Eastport Chemicals".into(),
                category: "hazardous_chemicals".into(),
            },
        ),
        station("E1", "S1", "Security office", "P1"),
        station("E1", "S2", "Maintenance", "P2"),
        station("E2", "S3", "Tank farm", "P3"),
    ]);
    for (station_id, category) in [
        ("S1", "shopping_mall"),
        ("S2", "shopping_mall"),
        ("S3", "hazardous_chemicals"),
    ] {
        if let Some(t) = templates.templates.iter().find(|t| t.category == category) {
            commands.push(GraphCommand::DeriveLists {
                station_id: station_id.into(),
                template_id: t.id.clone(),
            });
        }
    }
    commands
}

/// The demo network built in memory.
pub fn demo_graph() -> Graph {
    let mut graph = Graph::new();
    for command in demo_commands(&default_templates()) {
        graph.apply(&command).expect("demo commands are valid");
    }
    graph
}

/// One sensor rule per station, each with a different deduction mode,
/// targeting the station's first item.
pub fn demo_rules(graph: &Graph) -> Vec<ThresholdRule> {
    let first_item = |station: &str| -> Option<Id> {
        let s = graph.station(station)?;
        let list = graph.list(s.list_ids.first()?)?;
        list.item_ids.first().cloned()
    };
    let mut rules = Vec::new();
    if let Some(target) = first_item("S1") {
        rules.push(ThresholdRule {
            rule_id: "R1".into(),
            sensor_id: "hydrant-main-1".into(),
            metric: "pressure".into(),
            comparator: Comparator::Gt,
            critical_value: 1.2,
            unit: "MPa".into(),
            deduction_mode: DeductionMode::OncePerBreach,
            penalty_points: 5.0,
            target_item_id: target,
            cooldown_hours: 0.0,
        });
    }
    if let Some(target) = first_item("S2") {
        rules.push(ThresholdRule {
            rule_id: "R2".into(),
            sensor_id: "pump-room-2".into(),
            metric: "temperature".into(),
            comparator: Comparator::Gt,
            critical_value: 45.0,
            unit: "C".into(),
            deduction_mode: DeductionMode::PerOccurrence,
            penalty_points: 3.0,
            target_item_id: target,
            cooldown_hours: 12.0,
        });
    }
    if let Some(target) = first_item("S3") {
        rules.push(ThresholdRule {
            rule_id: "R3".into(),
            sensor_id: "tank-3".into(),
            metric: "pressure".into(),
            comparator: Comparator::Gt,
            critical_value: 1.6,
            unit: "MPa".into(),
            deduction_mode: DeductionMode::PerDayWhileActive,
            penalty_points: 2.0,
            target_item_id: target,
            cooldown_hours: 0.0,
        });
    }
    rules
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_graph_shape() {
        let graph = demo_graph();
        assert!(graph.validate().is_empty(), "{:?}", graph.validate());
        assert_eq!(graph.companies().count(), 1);
        assert_eq!(graph.enterprises().count(), 2);
        assert_eq!(graph.stations().count(), 3);
        let categories: Vec<_> = graph.enterprises().map(|e| e.category.as_str()).collect();
        assert_ne!(categories[0], categories[1]);
        assert_eq!(demo_rules(&graph).len(), 3);
    }

    #[test]
    fn default_templates_parse_back() {
        let text = serde_json::to_string_pretty(&default_templates()).unwrap();
        assert_eq!(TemplateSet::parse(&text).unwrap(), default_templates());
    }
}
