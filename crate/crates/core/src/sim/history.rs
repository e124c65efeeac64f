//! Operation histories: the invocation/response log recorded by a run.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{AppendResult, ProcessId, RecordId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Invoke,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Get,
    Append,
}

/// One line of `history.jsonl`. Field order is part of the file format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryEvent {
    pub op: String,
    pub client: ProcessId,
    pub ev: EventType,
    pub kind: OpKind,
    pub c: u64,
    pub t: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<AppendResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<Vec<RecordId>>,
}

pub fn op_id(client: ProcessId, c: u64) -> String {
    format!("op{client}:{c}")
}

impl HistoryEvent {
    pub fn invoke_get(client: ProcessId, c: u64, t: u64) -> Self {
        Self {
            op: op_id(client, c),
            client,
            ev: EventType::Invoke,
            kind: OpKind::Get,
            c,
            t,
            payload: None,
            result: None,
            seq: None,
        }
    }

    pub fn invoke_append(client: ProcessId, c: u64, t: u64, payload: impl Into<String>) -> Self {
        Self {
            kind: OpKind::Append,
            payload: Some(payload.into()),
            ..Self::invoke_get(client, c, t)
        }
    }

    pub fn get_response(client: ProcessId, c: u64, t: u64, seq: Vec<RecordId>) -> Self {
        Self {
            ev: EventType::Response,
            seq: Some(seq),
            ..Self::invoke_get(client, c, t)
        }
    }

    pub fn append_response(client: ProcessId, c: u64, t: u64, result: AppendResult) -> Self {
        Self {
            ev: EventType::Response,
            kind: OpKind::Append,
            result: Some(result),
            ..Self::invoke_get(client, c, t)
        }
    }

    /// Record id of an append: `(client, c)`.
    pub fn tau(&self) -> RecordId {
        RecordId::new(self.client, self.c)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HistoryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("operation {0} is invoked twice")]
    DoubleInvoke(String),
    #[error("operation {0} responds twice")]
    DoubleResponse(String),
    #[error("operation {0} responds without an invocation")]
    ResponseWithoutInvoke(String),
    #[error("operation {op}: response kind differs from invocation")]
    KindMismatch { op: String },
    #[error("operation {op}: {field} missing")]
    MissingField { op: String, field: &'static str },
    #[error("operation {op} has an id not matching its client and counter")]
    BadId { op: String },
    #[error("client {client} invokes {op} while another operation is pending")]
    Overlap { client: ProcessId, op: String },
    #[error("event times go backwards at {op}")]
    TimeReversal { op: String },
}

/// An ordered list of history events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<HistoryEvent>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ev: HistoryEvent) {
        self.events.push(ev);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for ev in &self.events {
            serde_json::to_writer(&mut w, ev)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, HistoryError> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| HistoryError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let ev = serde_json::from_str(&line).map_err(|e| HistoryError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            events.push(ev);
        }
        Ok(Self { events })
    }

    pub fn from_jsonl(text: &str) -> Result<Self, HistoryError> {
        Self::read_jsonl(text.as_bytes())
    }

    /// Checks well-formedness: one invoke and at most one later response per
    /// operation, at most one pending operation per client, responses carry
    /// the fields their kind requires, and times never decrease.
    pub fn validate(&self) -> Result<(), HistoryError> {
        let mut invoked: BTreeMap<&str, OpKind> = BTreeMap::new();
        let mut responded: BTreeSet<&str> = BTreeSet::new();
        let mut open: BTreeMap<ProcessId, &str> = BTreeMap::new();
        let mut last_t = 0;
        for ev in &self.events {
            let op = ev.op.as_str();
            if ev.t < last_t {
                return Err(HistoryError::TimeReversal { op: ev.op.clone() });
            }
            last_t = ev.t;
            if ev.op != op_id(ev.client, ev.c) {
                return Err(HistoryError::BadId { op: ev.op.clone() });
            }
            match ev.ev {
                EventType::Invoke => {
                    if invoked.insert(op, ev.kind).is_some() {
                        return Err(HistoryError::DoubleInvoke(ev.op.clone()));
                    }
                    if open.insert(ev.client, op).is_some() {
                        return Err(HistoryError::Overlap {
                            client: ev.client,
                            op: ev.op.clone(),
                        });
                    }
                    if ev.kind == OpKind::Append && ev.payload.is_none() {
                        return Err(HistoryError::MissingField { op: ev.op.clone(), field: "payload" });
                    }
                }
                EventType::Response => {
                    let Some(kind) = invoked.get(op) else {
                        return Err(HistoryError::ResponseWithoutInvoke(ev.op.clone()));
                    };
                    if !responded.insert(op) {
                        return Err(HistoryError::DoubleResponse(ev.op.clone()));
                    }
                    if *kind != ev.kind {
                        return Err(HistoryError::KindMismatch { op: ev.op.clone() });
                    }
                    match ev.kind {
                        OpKind::Get if ev.seq.is_none() => {
                            return Err(HistoryError::MissingField { op: ev.op.clone(), field: "seq" })
                        }
                        OpKind::Append if ev.result.is_none() => {
                            return Err(HistoryError::MissingField { op: ev.op.clone(), field: "result" })
                        }
                        _ => {}
                    }
                    open.remove(&ev.client);
                }
            }
        }
        Ok(())
    }
}
