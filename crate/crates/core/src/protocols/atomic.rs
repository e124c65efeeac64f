use std::collections::{BTreeMap, BTreeSet};

use crate::abcast::AbPayload;
use crate::ledger::{AppendResult, ProcessId, RecordId, RecordSequence};

use super::{Action, Request, Response, ServerProtocol};

/// Atomic (linearizable) server: both gets and appends go through the
/// atomic broadcast, and the answer is sent when the server delivers the
/// request it broadcast (or any copy of it).
#[derive(Debug, Clone, Default)]
pub struct AtomicServer {
    replica: RecordSequence,
    /// Appends received from clients and not yet answered, by record id.
    pending: BTreeMap<RecordId, u64>,
    /// Gets received from clients and not yet answered, as (client, c).
    get_pending: BTreeSet<(ProcessId, u64)>,
}

impl AtomicServer {
    pub fn pending_appends(&self) -> usize {
        self.pending.len()
    }

    pub fn pending_gets(&self) -> usize {
        self.get_pending.len()
    }
}

impl ServerProtocol for AtomicServer {
    fn on_request(&mut self, from: ProcessId, req: Request) -> Vec<Action> {
        match req {
            Request::Get { c, .. } => {
                self.get_pending.insert((from, c));
                vec![Action::Broadcast(AbPayload::Get { client: from, c })]
            }
            Request::Append { c, record } => {
                self.pending.insert(record.tau, c);
                vec![Action::Broadcast(AbPayload::Append { c, record })]
            }
        }
    }

    fn on_deliver(&mut self, payload: &AbPayload) -> Vec<Action> {
        match payload {
            AbPayload::Get { client, c } => {
                if self.get_pending.remove(&(*client, *c)) {
                    vec![Action::Respond {
                        to: *client,
                        resp: Response::GetRes {
                            c: *c,
                            seq: self.replica.clone(),
                        },
                    }]
                } else {
                    Vec::new()
                }
            }
            AbPayload::Append { record, .. } => {
                if !self.replica.contains(&record.tau) {
                    self.replica
                        .push(record.clone())
                        .expect("membership checked above");
                }
                // The pending entry is answered whether or not this copy was
                // the first: the request may have reached this server after
                // another server's copy had already been delivered here.
                match self.pending.remove(&record.tau) {
                    Some(c) => vec![Action::Respond {
                        to: record.creator(),
                        resp: Response::AppendRes {
                            c,
                            result: AppendResult::Ack,
                            pos: None,
                        },
                    }],
                    None => Vec::new(),
                }
            }
        }
    }

    fn replica(&self) -> &RecordSequence {
        &self.replica
    }
}
