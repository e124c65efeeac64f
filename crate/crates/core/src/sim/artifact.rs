//! On-disk run artifacts.
//!
//! Layout of an artifact directory:
//!
//! - `history.jsonl`: client invocations and responses
//! - `abtrace.jsonl`: broadcast, delivery and crash events
//! - `states.json`: final replica of every server
//! - `meta.json`: scenario, its hash, seed and run bookkeeping
//! - `validated.jsonl`: filtered get results, only when a predicate is set

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::history::{History, HistoryError};
use super::scenario::{ClientCrashSpec, CrashSpec, Scenario};
use crate::abcast::{AbTrace, ServerId};
use crate::ledger::{ProcessId, RecordId, RecordSequence};

pub const HISTORY_FILE: &str = "history.jsonl";
pub const ABTRACE_FILE: &str = "abtrace.jsonl";
pub const STATES_FILE: &str = "states.json";
pub const META_FILE: &str = "meta.json";
pub const VALIDATED_FILE: &str = "validated.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerSnapshot {
    pub id: ServerId,
    pub crashed: bool,
    pub records: RecordSequence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct StatesFile {
    servers: Vec<ServerSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario_hash: String,
    pub seed: u64,
    pub scenario: Scenario,
    /// Server crashes actually scheduled (explicit and drawn).
    pub crashes: Vec<CrashSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub client_crashes: Vec<ClientCrashSpec>,
    /// Index of the first history event of the probe phase.
    pub probe_start: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub decisions: BTreeMap<ProcessId, String>,
    pub events_executed: u64,
    pub end_time: u64,
}

/// The client-side view of a get under a validity predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatedGet {
    pub op: String,
    pub seq: Vec<RecordId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub history: History,
    pub abtrace: AbTrace,
    pub states: Vec<ServerSnapshot>,
    pub meta: RunMeta,
    pub validated_gets: Vec<ValidatedGet>,
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    History {
        path: PathBuf,
        #[source]
        source: HistoryError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Json {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), ArtifactError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

impl RunArtifact {
    pub fn write_dir(&self, dir: &Path) -> Result<(), ArtifactError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_file(&dir.join(HISTORY_FILE), |w| self.history.write_jsonl(w))?;
        write_file(&dir.join(ABTRACE_FILE), |w| self.abtrace.write_jsonl(w))?;
        write_pretty(
            &dir.join(STATES_FILE),
            &StatesFile {
                servers: self.states.clone(),
            },
        )?;
        write_pretty(&dir.join(META_FILE), &self.meta)?;
        let validated = dir.join(VALIDATED_FILE);
        if self.meta.scenario.predicate.is_some() {
            write_file(&validated, |w| {
                for g in &self.validated_gets {
                    serde_json::to_writer(&mut *w, g)?;
                    w.write_all(b"\n")?;
                }
                Ok(())
            })?;
        } else if validated.exists() {
            fs::remove_file(&validated).map_err(io_err(&validated))?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self, ArtifactError> {
        let path = dir.join(HISTORY_FILE);
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let history = History::read_jsonl(BufReader::new(file)).map_err(|source| ArtifactError::History {
            path: path.clone(),
            source,
        })?;
        let path = dir.join(ABTRACE_FILE);
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let abtrace = AbTrace::read_jsonl(BufReader::new(file)).map_err(json_err(&path))?;
        let states: StatesFile = read_json(&dir.join(STATES_FILE))?;
        let meta: RunMeta = read_json(&dir.join(META_FILE))?;
        let path = dir.join(VALIDATED_FILE);
        let mut validated_gets = Vec::new();
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                validated_gets.push(serde_json::from_str(line).map_err(json_err(&path))?);
            }
        }
        Ok(Self {
            history,
            abtrace,
            states: states.servers,
            meta,
            validated_gets,
        })
    }
}
