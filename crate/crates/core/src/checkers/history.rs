use std::collections::{BTreeMap, BTreeSet};

use crate::ledger::{AppendResult, ProcessId, Record, RecordId};
use crate::sim::{EventType, History, HistoryError, OpKind};

use super::CheckError;

/// Most pending appends [`complete_history`] will enumerate (2^k candidates).
pub const MAX_PENDING_APPENDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpBody {
    Get { returned: Vec<RecordId> },
    /// `result` is `None` for a pending append kept in a completion.
    Append { record: Record, result: Option<AppendResult> },
}

/// One operation of a history. `invoke` and `response` are event indices
/// in the recorded history; a missing response stands for +∞.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operation {
    pub id: String,
    pub client: ProcessId,
    pub c: u64,
    pub invoke: usize,
    pub response: Option<usize>,
    pub invoke_t: u64,
    pub response_t: Option<u64>,
    pub body: OpBody,
}

impl Operation {
    /// Real-time precedence: this operation responded before `other` was
    /// invoked.
    pub fn precedes(&self, other: &Operation) -> bool {
        self.response.is_some_and(|r| r < other.invoke)
    }

    pub fn is_complete(&self) -> bool {
        self.response.is_some()
    }

    pub fn returned(&self) -> Option<&[RecordId]> {
        match &self.body {
            OpBody::Get { returned } => Some(returned),
            OpBody::Append { .. } => None,
        }
    }

    pub fn record(&self) -> Option<&Record> {
        match &self.body {
            OpBody::Append { record, .. } => Some(record),
            OpBody::Get { .. } => None,
        }
    }
}

/// A recorded history split into complete and pending operations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartialHistory {
    pub complete: Vec<Operation>,
    pub pending_appends: Vec<Operation>,
    pub pending_gets: Vec<String>,
}

impl PartialHistory {
    pub fn from_history(h: &History) -> Result<Self, HistoryError> {
        h.validate()?;
        let mut open: BTreeMap<&str, Operation> = BTreeMap::new();
        let mut complete = Vec::new();
        for (i, ev) in h.events.iter().enumerate() {
            match ev.ev {
                EventType::Invoke => {
                    let body = match ev.kind {
                        OpKind::Get => OpBody::Get { returned: Vec::new() },
                        OpKind::Append => OpBody::Append {
                            record: Record::new(ev.tau(), ev.payload.clone().unwrap_or_default()),
                            result: None,
                        },
                    };
                    open.insert(
                        &ev.op,
                        Operation {
                            id: ev.op.clone(),
                            client: ev.client,
                            c: ev.c,
                            invoke: i,
                            response: None,
                            invoke_t: ev.t,
                            response_t: None,
                            body,
                        },
                    );
                }
                EventType::Response => {
                    let mut op = open.remove(ev.op.as_str()).expect("validated history");
                    op.response = Some(i);
                    op.response_t = Some(ev.t);
                    match &mut op.body {
                        OpBody::Get { returned } => *returned = ev.seq.clone().unwrap_or_default(),
                        OpBody::Append { result, .. } => *result = ev.result,
                    }
                    complete.push(op);
                }
            }
        }
        let mut pending_appends = Vec::new();
        let mut pending_gets = Vec::new();
        for op in open.into_values() {
            match op.body {
                OpBody::Get { .. } => pending_gets.push(op.id),
                OpBody::Append { .. } => pending_appends.push(op),
            }
        }
        complete.sort_by_key(|o| o.invoke);
        pending_appends.sort_by_key(|o| o.invoke);
        Ok(Self {
            complete,
            pending_appends,
            pending_gets,
        })
    }

    pub fn from_jsonl(text: &str) -> Result<Self, HistoryError> {
        Self::from_history(&History::from_jsonl(text)?)
    }
}

/// A history in which every operation counts as complete.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompletedHistory {
    /// Sorted by invocation.
    pub ops: Vec<Operation>,
    /// Pending operations left out of this completion.
    pub removed: Vec<String>,
}

impl CompletedHistory {
    pub fn new(mut ops: Vec<Operation>) -> Self {
        ops.sort_by_key(|o| o.invoke);
        Self {
            ops,
            removed: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn gets(&self) -> impl Iterator<Item = &Operation> {
        self.ops.iter().filter(|o| matches!(o.body, OpBody::Get { .. }))
    }

    pub fn appends(&self) -> impl Iterator<Item = &Operation> {
        self.ops.iter().filter(|o| matches!(o.body, OpBody::Append { .. }))
    }

    pub fn op(&self, id: &str) -> Option<&Operation> {
        self.ops.iter().find(|o| o.id == id)
    }

    /// The sub-history made of the operations whose id is in `ids`; other
    /// strings (record ids in a witness) are ignored.
    pub fn restrict<S: AsRef<str>>(&self, ids: &[S]) -> Self {
        let keep: BTreeSet<&str> = ids.iter().map(AsRef::as_ref).collect();
        Self {
            ops: self.ops.iter().filter(|o| keep.contains(o.id.as_str())).cloned().collect(),
            removed: Vec::new(),
        }
    }
}

/// Turns a partial history into the complete histories to check: pending
/// gets are dropped and each pending append is either kept (with its
/// response at +∞) or dropped. The first candidate keeps every pending
/// append, the last drops them all.
pub fn complete_history(h: &PartialHistory) -> Result<Vec<CompletedHistory>, CheckError> {
    let k = h.pending_appends.len();
    if k > MAX_PENDING_APPENDS {
        return Err(CheckError::TooManyPending {
            pending: k,
            limit: MAX_PENDING_APPENDS,
        });
    }
    let mut out = Vec::with_capacity(1 << k);
    for mask in 0..(1u32 << k) {
        let mut ops = h.complete.clone();
        let mut removed = h.pending_gets.clone();
        for (i, p) in h.pending_appends.iter().enumerate() {
            if mask & (1 << i) == 0 {
                ops.push(p.clone());
            } else {
                removed.push(p.id.clone());
            }
        }
        let mut c = CompletedHistory::new(ops);
        c.removed = removed;
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::HistoryEvent;

    fn sample() -> History {
        let mut h = History::new();
        h.push(HistoryEvent::invoke_append(0, 1, 0, "a"));
        h.push(HistoryEvent::invoke_get(1, 1, 1));
        h.push(HistoryEvent::get_response(1, 1, 2, vec![RecordId::new(0, 1)]));
        h.push(HistoryEvent::invoke_get(1, 2, 3));
        h
    }

    #[test]
    fn complete_history_without_pending_is_unique() {
        let mut h = History::new();
        h.push(HistoryEvent::invoke_get(0, 1, 0));
        h.push(HistoryEvent::get_response(0, 1, 1, vec![]));
        let p = PartialHistory::from_history(&h).unwrap();
        let c = complete_history(&p).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 1);
    }

    #[test]
    fn pending_gets_are_removed_and_pending_appends_branch() {
        let p = PartialHistory::from_history(&sample()).unwrap();
        assert_eq!(p.pending_gets, vec!["op1:2".to_string()]);
        let c = complete_history(&p).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].appends().count(), 1);
        assert_eq!(c[0].op("op0:1").unwrap().response, None);
        assert_eq!(c[1].appends().count(), 0);
        assert!(c.iter().all(|h| h.op("op1:2").is_none()));
        assert_eq!(c[1].removed.len(), 2);
    }

    #[test]
    fn too_many_pending_appends_is_refused() {
        let mut h = History::new();
        for client in 0..9 {
            h.push(HistoryEvent::invoke_append(client, 1, 0, "x"));
        }
        let p = PartialHistory::from_history(&h).unwrap();
        assert!(matches!(
            complete_history(&p),
            Err(CheckError::TooManyPending { pending: 9, limit: 8 })
        ));
    }

    #[test]
    fn precedence_uses_event_order() {
        let mut h = History::new();
        h.push(HistoryEvent::invoke_get(0, 1, 5));
        h.push(HistoryEvent::get_response(0, 1, 5, vec![]));
        h.push(HistoryEvent::invoke_get(1, 1, 5));
        h.push(HistoryEvent::get_response(1, 1, 6, vec![]));
        let p = PartialHistory::from_history(&h).unwrap();
        let (a, b) = (&p.complete[0], &p.complete[1]);
        assert!(a.precedes(b));
        assert!(!b.precedes(a));
    }

    #[test]
    fn restrict_keeps_only_named_operations() {
        let p = PartialHistory::from_history(&sample()).unwrap();
        let c = &complete_history(&p).unwrap()[0];
        let r = c.restrict(&["op1:1", "r0:1"]);
        assert_eq!(r.len(), 1);
        assert_eq!(r.ops[0].id, "op1:1");
    }
}
