//! On-disk layout of a data directory:
//!
//! ```text
//! graph.jsonl      graph mutations, rule registrations, duty generation, day closures
//! ledger.jsonl     score events, one per line
//! readings.jsonl   sensor readings, one per line
//! snapshots/       one `<YYYY-MM-DD>.json` per closed day
//! LOCK             held while a process owns the directory
//! ```
//!
//! Every log line carries a `seq` drawn from one counter shared by the
//! three logs, so replay can restore the original interleaving.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::DailySnapshot;

pub const GRAPH_LOG: &str = "graph.jsonl";
pub const LEDGER_LOG: &str = "ledger.jsonl";
pub const READINGS_LOG: &str = "readings.jsonl";
pub const SNAPSHOT_DIR: &str = "snapshots";
const LOCK_FILE: &str = "LOCK";

/// A log line: the payload's fields plus the global sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record<T> {
    pub seq: u64,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("data directory {0} is locked by another process")]
    DataDirLocked(PathBuf),
    #[error("{path}:{line}: corrupt record: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Reads every record of a log. A missing file reads as empty.
pub fn read_log<T: DeserializeOwned>(path: &Path) -> Result<Vec<Record<T>>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.to_owned(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn snapshot_path(dir: &Path, date: NaiveDate) -> PathBuf {
    dir.join(SNAPSHOT_DIR).join(format!("{date}.json"))
}

pub fn read_snapshot(dir: &Path, date: NaiveDate) -> Result<Option<DailySnapshot>, StoreError> {
    let path = snapshot_path(dir, date);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| StoreError::Corrupt {
            line: e.line(),
            message: e.to_string(),
            path,
        }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(&path)(e)),
    }
}

struct Appender {
    path: PathBuf,
    file: File,
}

impl Appender {
    fn open(path: PathBuf) -> Result<Self, StoreError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(Appender { path, file })
    }

    fn append<T: Serialize>(&mut self, record: &Record<T>) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))
    }
}

/// Exclusive handle on a data directory.
pub struct Store {
    dir: PathBuf,
    _lock: File,
    graph: Appender,
    ledger: Appender,
    readings: Appender,
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir.join(SNAPSHOT_DIR)).map_err(io_err(dir))?;
        let lock_path = dir.join(LOCK_FILE);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(io_err(&lock_path))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(StoreError::DataDirLocked(dir.to_owned())),
            Err(fs::TryLockError::Error(e)) => return Err(io_err(&lock_path)(e)),
        }
        Ok(Store {
            dir: dir.to_owned(),
            _lock: lock,
            graph: Appender::open(dir.join(GRAPH_LOG))?,
            ledger: Appender::open(dir.join(LEDGER_LOG))?,
            readings: Appender::open(dir.join(READINGS_LOG))?,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append_graph<T: Serialize>(&mut self, record: &Record<T>) -> Result<(), StoreError> {
        self.graph.append(record)
    }

    pub fn append_ledger<T: Serialize>(&mut self, record: &Record<T>) -> Result<(), StoreError> {
        self.ledger.append(record)
    }

    pub fn append_reading<T: Serialize>(&mut self, record: &Record<T>) -> Result<(), StoreError> {
        self.readings.append(record)
    }

    /// Writes a snapshot through a temporary file so a partial write never
    /// replaces a complete one.
    pub fn write_snapshot(&self, snapshot: &DailySnapshot) -> Result<(), StoreError> {
        let path = snapshot_path(&self.dir, snapshot.date);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(snapshot).expect("snapshots serialize");
        fs::write(&tmp, text).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }
}
