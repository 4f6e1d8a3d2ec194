//! Responsibility networks: a weighted responsibility hierarchy whose
//! scores are folded from an append-only ledger of reasoned events fed by
//! duty completions, manual input, IoT threshold breaches and overdue
//! periodic duties.

pub mod clock;
pub mod domain;
mod ids;
pub mod oracle;
pub mod safety_map;
pub mod scheduler;
pub mod scoring;
pub mod seed;
pub mod simulate;
pub mod store;
pub mod system;
pub mod telemetry;
pub mod verify;

#[cfg(test)]
mod testkit;

pub use ids::Id;
