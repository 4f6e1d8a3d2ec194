//! The `ior` command line: seed, simulate, close days, verify ledgers and
//! print score reports against a data directory, or run the HTTP service.

mod table;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use ior_core::domain::TemplateSet;
use ior_core::scoring::{Level, SeriesPoint};
use ior_core::seed;
use ior_core::simulate::{self, ScenarioSpec};
use ior_core::system::System;
use ior_core::telemetry::ThresholdRule;
use ior_core::verify;
use ior_server::Config;
use serde_json::json;

use table::Table;

#[derive(Debug, Parser)]
#[command(name = "ior", version, about = "Responsibility network administration")]
pub struct Cli {
    /// Print JSON instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataDir {
    /// Data directory holding the logs and snapshots.
    #[arg(long, env = "IOR_DATA_DIR", default_value = "ior-data")]
    pub data_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        /// JSON config file; IOR_* variables override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        regions: Option<PathBuf>,
    },
    /// Populate the demo network.
    Seed {
        #[command(flatten)]
        dir: DataDir,
        /// Template file to use instead of the built-in templates.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Threshold rules to register after seeding.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Generate and ingest a seeded synthetic workload, closing each day.
    Simulate {
        #[command(flatten)]
        dir: DataDir,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        days: u32,
        #[arg(long, default_value = "2024-01-01")]
        start: NaiveDate,
        #[arg(long)]
        enterprises: Option<u32>,
        #[arg(long)]
        stations_per_enterprise: Option<u32>,
        #[arg(long)]
        items_per_list: Option<u32>,
        #[arg(long)]
        event_rate: Option<f64>,
        #[arg(long)]
        breach_rate: Option<f64>,
        /// Where to write the generated event and reading traces.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
    /// Accrue, sweep and seal one day.
    CloseDay {
        #[command(flatten)]
        dir: DataDir,
        #[arg(long)]
        date: NaiveDate,
    },
    /// Recompute every snapshot from the ledger with the oracle.
    Verify {
        #[arg(long)]
        ledger: PathBuf,
    },
    /// Daily scores of one subject from the closed snapshots.
    Report {
        #[command(flatten)]
        dir: DataDir,
        #[arg(long)]
        level: Level,
        #[arg(long)]
        id: String,
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
    },
}

/// Process exit status of a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failed,
}

/// Runs a command other than `serve`, writing its output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<Outcome> {
    let json_output = cli.json;
    let emit = |out: &mut dyn Write, value: &dyn erased::Json, table: Table| -> anyhow::Result<()> {
        if json_output {
            writeln!(out, "{}", value.to_json())?;
        } else {
            write!(out, "{table}")?;
        }
        Ok(())
    };
    match cli.command {
        Command::Serve { .. } => bail!("`serve` runs through `serve_command`"),
        Command::Seed { dir, templates, rules } => {
            let set = match &templates {
                Some(path) => read_templates(path)?,
                None => seed::default_templates(),
            };
            let rules = rules.as_deref().map(read_rules).transpose()?;
            let mut system = open(&dir.data_dir)?;
            let already = system.graph().company(seed::DEMO_COMPANY).is_some();
            if !already {
                for command in seed::demo_commands(&set) {
                    system.apply_graph(command)?;
                }
            }
            for rule in rules.into_iter().flatten() {
                system.register_rule(rule)?;
            }
            let g = system.graph();
            let violations = g.validate();
            let summary = json!({
                "data_dir": dir.data_dir,
                "already_seeded": already,
                "companies": g.companies().count(),
                "enterprises": g.enterprises().count(),
                "stations": g.stations().count(),
                "lists": g.lists().count(),
                "items": g.items().count(),
                "rules": system.telemetry().rules().count(),
                "violations": violations,
            });
            let mut t = Table::new(["", ""]);
            t.row([
                "status".into(),
                if already {
                    "already seeded, nothing added"
                } else {
                    "seeded"
                }
                .into(),
            ]);
            for key in ["companies", "enterprises", "stations", "lists", "items", "rules"] {
                t.row([key.into(), summary[key].to_string()]);
            }
            t.row(["violations".into(), violations.len().to_string()]);
            emit(out, &summary, t)?;
            Ok(if violations.is_empty() {
                Outcome::Success
            } else {
                Outcome::Failed
            })
        }
        Command::Simulate {
            dir,
            seed,
            days,
            start,
            enterprises,
            stations_per_enterprise,
            items_per_list,
            event_rate,
            breach_rate,
            trace_dir,
        } => {
            let defaults = ScenarioSpec::default();
            let spec = ScenarioSpec {
                seed,
                days,
                start,
                enterprises,
                stations_per_enterprise,
                items_per_list,
                event_rate: event_rate.unwrap_or(defaults.event_rate),
                breach_rate: breach_rate.unwrap_or(defaults.breach_rate),
            };
            let mut system = open(&dir.data_dir)?;
            let trace_dir = trace_dir.unwrap_or_else(|| dir.data_dir.join("traces"));
            let report = simulate::run(&mut system, &spec, Some(&trace_dir))?;
            let mut t = Table::new(["level", "id", "score"]);
            for level in [Level::Enterprise, Level::Station, Level::List, Level::Item] {
                for (id, score) in report.scores.level(level) {
                    t.row([level.to_string(), id.to_string(), format!("{score:.2}")]);
                }
            }
            t.note(format!(
                "{} days closed, {} events and {} readings submitted, {} ledger events",
                report.days_closed, report.events_submitted, report.readings_submitted, report.ledger_events
            ));
            for n in &report.reminders {
                t.note(format!(
                    "reminder: {} for {} at {:.2}",
                    n.personnel_id, n.subject_id, n.score
                ));
            }
            for (enterprise, rows) in &report.accountability {
                for r in rows {
                    t.note(format!(
                        "accountability {enterprise}: {} at {:.2} (station {}, leader {})",
                        r.item_id, r.score, r.station_id, r.leader_personnel_id
                    ));
                }
            }
            t.note(format!("traces in {}", trace_dir.display()));
            emit(out, &report, t)?;
            Ok(Outcome::Success)
        }
        Command::CloseDay { dir, date } => {
            let mut system = open(&dir.data_dir)?;
            let report = system.close_day(date)?;
            let mut t = Table::new(["item", "points", "reason"]);
            for r in &report.snapshot.reasons {
                t.row([r.item_id.to_string(), format!("{:+}", r.points), r.reason.clone()]);
            }
            t.note(format!(
                "closed {date}: {} events emitted by the close",
                report.emitted.len()
            ));
            emit(out, &report, t)?;
            Ok(Outcome::Success)
        }
        Command::Verify { ledger } => {
            let report = verify::verify(&ledger)?;
            let mut t = Table::new(["", ""]);
            t.row(["ledger".into(), report.ledger.display().to_string()]);
            t.row(["events".into(), report.events.to_string()]);
            t.row(["days checked".into(), report.days_checked.to_string()]);
            t.row([
                "result".into(),
                match &report.divergence {
                    None => "pass".into(),
                    Some(d) => format!("FAIL: {d}"),
                },
            ]);
            emit(out, &report, t)?;
            Ok(if report.passed() {
                Outcome::Success
            } else {
                Outcome::Failed
            })
        }
        Command::Report {
            dir,
            level,
            id,
            from,
            to,
        } => {
            let system = open(&dir.data_dir)?;
            let points: Vec<SeriesPoint> = system.score_series(level, &id, from, to)?;
            let mut t = Table::new(["date", "score", "change"]);
            let mut previous: Option<f64> = None;
            for p in &points {
                let change = previous.map_or(String::new(), |prev| format!("{:+.2}", p.score - prev));
                t.row([p.date.to_string(), format!("{:.2}", p.score), change]);
                previous = Some(p.score);
            }
            let value = json!({ "level": level, "id": id, "points": points });
            emit(out, &value, t)?;
            Ok(Outcome::Success)
        }
    }
}

/// Builds the service config from an optional file, `IOR_*` variables and
/// command-line flags, in increasing precedence.
pub fn serve_config(
    config: Option<&Path>,
    data_dir: Option<PathBuf>,
    listen: Option<String>,
    templates: Option<PathBuf>,
    rules: Option<PathBuf>,
    regions: Option<PathBuf>,
    env: impl IntoIterator<Item = (String, String)>,
) -> anyhow::Result<Config> {
    let mut env: Vec<(String, String)> = env.into_iter().collect();
    let flags = [
        ("IOR_DATA_DIR", data_dir.map(|p| p.display().to_string())),
        ("IOR_LISTEN_ADDR", listen),
        ("IOR_TEMPLATES_PATH", templates.map(|p| p.display().to_string())),
        ("IOR_RULES_PATH", rules.map(|p| p.display().to_string())),
        ("IOR_REGIONS_PATH", regions.map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            env.push((key.into(), value));
        }
    }
    Ok(Config::load(config, env)?)
}

fn open(dir: &Path) -> anyhow::Result<System> {
    System::open(dir).with_context(|| format!("opening data directory {}", dir.display()))
}

fn read_templates(path: &Path) -> anyhow::Result<TemplateSet> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TemplateSet::parse(&text).map_err(|e| anyhow::anyhow!("{}:{}: {}", path.display(), e.line, e.error))
}

fn read_rules(path: &Path) -> anyhow::Result<Vec<ThresholdRule>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

mod erased {
    use serde::Serialize;

    /// Object-safe JSON rendering.
    pub trait Json {
        fn to_json(&self) -> String;
    }

    impl<T: Serialize> Json for T {
        fn to_json(&self) -> String {
            serde_json::to_string_pretty(self).expect("output serializes")
        }
    }
}
