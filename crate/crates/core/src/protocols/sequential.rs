use std::collections::{BTreeMap, BTreeSet};

use crate::abcast::AbPayload;
use crate::ledger::{AppendResult, ProcessId, RecordId, RecordSequence};

use super::{Action, Request, Response, ServerProtocol};

/// Sequentially consistent server. Gets are answered locally, but only
/// once the replica is at least as long as the length the client last
/// observed; appends are acked on delivery together with the replica
/// length.
#[derive(Debug, Clone, Default)]
pub struct SequentialServer {
    replica: RecordSequence,
    pending: BTreeMap<RecordId, u64>,
    /// Deferred gets as (c, client, required length).
    get_pending: BTreeSet<(u64, ProcessId, usize)>,
}

impl SequentialServer {
    pub fn deferred_gets(&self) -> usize {
        self.get_pending.len()
    }

    fn get_res(&self, to: ProcessId, c: u64) -> Action {
        Action::Respond {
            to,
            resp: Response::GetRes {
                c,
                seq: self.replica.clone(),
            },
        }
    }
}

impl ServerProtocol for SequentialServer {
    fn on_request(&mut self, from: ProcessId, req: Request) -> Vec<Action> {
        match req {
            Request::Get { c, l_last } => {
                let needed = l_last.unwrap_or(0);
                if self.replica.len() >= needed {
                    vec![self.get_res(from, c)]
                } else {
                    self.get_pending.insert((c, from, needed));
                    Vec::new()
                }
            }
            Request::Append { c, record } => {
                self.pending.insert(record.tau, c);
                vec![Action::Broadcast(AbPayload::Append { c, record })]
            }
        }
    }

    fn on_deliver(&mut self, payload: &AbPayload) -> Vec<Action> {
        let AbPayload::Append { record, .. } = payload else {
            return Vec::new();
        };
        if !self.replica.contains(&record.tau) {
            self.replica
                .push(record.clone())
                .expect("membership checked above");
        }
        let mut out = Vec::new();
        if let Some(c) = self.pending.remove(&record.tau) {
            out.push(Action::Respond {
                to: record.creator(),
                resp: Response::AppendRes {
                    c,
                    result: AppendResult::Ack,
                    pos: Some(self.replica.len()),
                },
            });
        }
        let len = self.replica.len();
        let ready: Vec<_> = self
            .get_pending
            .iter()
            .filter(|(_, _, needed)| len >= *needed)
            .copied()
            .collect();
        for entry @ (c, client, _) in ready {
            self.get_pending.remove(&entry);
            out.push(self.get_res(client, c));
        }
        out
    }

    fn replica(&self) -> &RecordSequence {
        &self.replica
    }
}
