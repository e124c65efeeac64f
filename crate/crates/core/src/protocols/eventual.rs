use crate::abcast::AbPayload;
use crate::ledger::{AppendResult, ProcessId, RecordSequence};

use super::{Action, Request, Response, ServerProtocol};

/// Eventually consistent server: answers gets from the local replica and
/// acknowledges appends as soon as they are broadcast.
#[derive(Debug, Clone, Default)]
pub struct EventualServer {
    replica: RecordSequence,
}

impl ServerProtocol for EventualServer {
    fn on_request(&mut self, from: ProcessId, req: Request) -> Vec<Action> {
        match req {
            Request::Get { c, .. } => vec![Action::Respond {
                to: from,
                resp: Response::GetRes {
                    c,
                    seq: self.replica.clone(),
                },
            }],
            Request::Append { c, record } => vec![
                Action::Broadcast(AbPayload::Append { c, record }),
                Action::Respond {
                    to: from,
                    resp: Response::AppendRes {
                        c,
                        result: AppendResult::Ack,
                        pos: None,
                    },
                },
            ],
        }
    }

    fn on_deliver(&mut self, payload: &AbPayload) -> Vec<Action> {
        if let AbPayload::Append { record, .. } = payload {
            if !self.replica.contains(&record.tau) {
                self.replica
                    .push(record.clone())
                    .expect("membership checked above");
            }
        }
        Vec::new()
    }

    fn replica(&self) -> &RecordSequence {
        &self.replica
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Record, RecordId};

    fn rec(i: u64) -> Record {
        Record::new(RecordId::new(1, i), "x")
    }

    #[test]
    fn get_before_any_delivery_returns_empty() {
        let mut s = EventualServer::default();
        let out = s.on_request(4, Request::Get { c: 1, l_last: None });
        assert_eq!(
            out,
            vec![Action::Respond {
                to: 4,
                resp: Response::GetRes {
                    c: 1,
                    seq: RecordSequence::new()
                }
            }]
        );
    }

    #[test]
    fn append_is_acked_before_the_record_is_local() {
        let mut s = EventualServer::default();
        let out = s.on_request(1, Request::Append { c: 3, record: rec(3) });
        assert!(matches!(out[0], Action::Broadcast(AbPayload::Append { c: 3, .. })));
        assert!(matches!(
            out[1],
            Action::Respond {
                to: 1,
                resp: Response::AppendRes { c: 3, result: AppendResult::Ack, .. }
            }
        ));
        assert!(s.replica().is_empty());
    }

    #[test]
    fn second_delivery_of_a_record_is_discarded() {
        let mut s = EventualServer::default();
        let p = AbPayload::Append { c: 1, record: rec(1) };
        s.on_deliver(&p);
        s.on_deliver(&p);
        assert_eq!(s.replica().taus(), vec![RecordId::new(1, 1)]);
    }
}
