//! Client interface and replicated-server state machines.
//!
//! Every server handler is a pure step `(state, input) -> actions`; the
//! simulator routes the resulting [`Action`]s onto the network or the
//! atomic broadcast service. Handlers of one server never interleave.

use serde::{Deserialize, Serialize};

use crate::abcast::{AbPayload, ServerId};
use crate::ledger::{AppendResult, ProcessId, Record, RecordSequence};

mod atomic;
mod client;
pub mod consensus;
mod eventual;
mod sequential;

pub use atomic::AtomicServer;
pub use client::{select_servers, ClientState, Completion, PendingOp};
pub use consensus::{ConsensusState, Proposer};
pub use eventual::EventualServer;
pub use sequential::SequentialServer;

/// Consistency level implemented by the servers (and the matching client).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Eventual,
    Sequential,
    Atomic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Eventual => "eventual",
            Self::Sequential => "sequential",
            Self::Atomic => "atomic",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    /// `l_last` is only sent by the sequential-consistency client.
    Get { c: u64, l_last: Option<usize> },
    Append { c: u64, record: Record },
}

impl Request {
    pub fn c(&self) -> u64 {
        match self {
            Self::Get { c, .. } | Self::Append { c, .. } => *c,
        }
    }
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    GetRes { c: u64, seq: RecordSequence },
    /// `pos` is the replica length after the append (sequential mode only).
    AppendRes { c: u64, result: AppendResult, pos: Option<usize> },
}

impl Response {
    pub fn c(&self) -> u64 {
        match self {
            Self::GetRes { c, .. } | Self::AppendRes { c, .. } => *c,
        }
    }
}

/// Output of a server handler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Respond { to: ProcessId, resp: Response },
    Broadcast(AbPayload),
}

/// A replicated ledger server.
pub trait ServerProtocol: Send {
    fn on_request(&mut self, from: ProcessId, req: Request) -> Vec<Action>;

    fn on_deliver(&mut self, payload: &AbPayload) -> Vec<Action>;

    /// The local replica `S_i`.
    fn replica(&self) -> &RecordSequence;
}

pub fn new_server(mode: Mode, _id: ServerId) -> Box<dyn ServerProtocol> {
    match mode {
        Mode::Eventual => Box::new(EventualServer::default()),
        Mode::Sequential => Box::new(SequentialServer::default()),
        Mode::Atomic => Box::new(AtomicServer::default()),
    }
}
