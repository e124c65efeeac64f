use crate::abcast::ServerId;
use crate::ledger::{AppendResult, ProcessId, Record, RecordId, RecordSequence};

use super::{Mode, Request, Response};

/// The `f + 1` servers a client talks to: server ids `0..n` rotated by the
/// client id.
pub fn select_servers(client: ProcessId, n: u32, f: u32) -> Vec<ServerId> {
    assert!(f < n, "need f < n");
    (0..=f).map(|k| (client + k) % n).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PendingOp {
    Get { c: u64 },
    Append { c: u64, record: Record },
}

impl PendingOp {
    pub fn c(&self) -> u64 {
        match self {
            Self::Get { c } | Self::Append { c, .. } => *c,
        }
    }
}

/// An operation that just received its first matching response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completion {
    Get { c: u64, seq: RecordSequence },
    Append { c: u64, record: Record, result: AppendResult },
}

/// Client side of the distributed ledger interface.
///
/// Each operation gets a fresh counter value `c`; the request goes to all
/// servers in [`ClientState::servers`] and the first response carrying that
/// `c` completes it. Appended records are identified by `(client, c)`.
#[derive(Debug, Clone)]
pub struct ClientState {
    id: ProcessId,
    mode: Mode,
    c: u64,
    servers: Vec<ServerId>,
    l_last: usize,
    pending: Option<PendingOp>,
}

impl ClientState {
    pub fn new(id: ProcessId, mode: Mode, servers: Vec<ServerId>) -> Self {
        Self {
            id,
            mode,
            c: 0,
            servers,
            l_last: 0,
            pending: None,
        }
    }

    pub fn id(&self) -> ProcessId {
        self.id
    }

    pub fn counter(&self) -> u64 {
        self.c
    }

    pub fn servers(&self) -> &[ServerId] {
        &self.servers
    }

    /// Last observed ledger length (only tracked by the sequential client).
    pub fn l_last(&self) -> usize {
        self.l_last
    }

    pub fn pending(&self) -> Option<&PendingOp> {
        self.pending.as_ref()
    }

    pub fn begin_get(&mut self) -> Request {
        assert!(self.pending.is_none(), "client {} already has an operation in flight", self.id);
        self.c += 1;
        self.pending = Some(PendingOp::Get { c: self.c });
        let l_last = (self.mode == Mode::Sequential).then_some(self.l_last);
        Request::Get { c: self.c, l_last }
    }

    pub fn begin_append(&mut self, payload: impl Into<String>) -> Request {
        assert!(self.pending.is_none(), "client {} already has an operation in flight", self.id);
        self.c += 1;
        let record = Record::new(RecordId::new(self.id, self.c), payload);
        self.pending = Some(PendingOp::Append {
            c: self.c,
            record: record.clone(),
        });
        Request::Append { c: self.c, record }
    }

    /// Consumes a response. Returns the completion if it is the first
    /// response for the in-flight operation; later duplicates yield `None`.
    pub fn on_response(&mut self, resp: Response) -> Option<Completion> {
        let pending = self.pending.as_ref()?;
        if pending.c() != resp.c() {
            return None;
        }
        let completion = match (self.pending.take()?, resp) {
            (PendingOp::Get { c }, Response::GetRes { seq, .. }) => {
                if self.mode == Mode::Sequential {
                    debug_assert!(seq.len() >= self.l_last);
                    self.l_last = seq.len();
                }
                Completion::Get { c, seq }
            }
            (PendingOp::Append { c, record }, Response::AppendRes { result, pos, .. }) => {
                if self.mode == Mode::Sequential {
                    let pos = pos.expect("sequential servers report the append position");
                    debug_assert!(pos >= self.l_last);
                    self.l_last = pos;
                }
                Completion::Append { c, record, result }
            }
            (p, r) => panic!("response {r:?} does not match pending {p:?}"),
        };
        Some(completion)
    }
}
