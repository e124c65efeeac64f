//! Exhaustive search for a permutation that respects an ordering constraint
//! and replays correctly through the sequential ledger.

use std::collections::HashSet;

use thiserror::Error;

use crate::ledger::RecordId;

use super::history::{CompletedHistory, OpBody, Operation};
use super::spec::check_sequential_spec;

/// Largest history the oracle will search.
pub const ORACLE_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderConstraint {
    /// Real-time order between any two operations.
    RealTime,
    /// Real-time order between operations of the same process.
    PerProcess,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("history has {ops} operations, the oracle handles at most {limit}; use the property checks instead")]
pub struct CapacityError {
    pub ops: usize,
    pub limit: usize,
}

/// A witness order of operation ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Linearization {
    pub order: Vec<String>,
}

impl Linearization {
    /// Replays the order through the sequential ledger.
    pub fn replays(&self, h: &CompletedHistory) -> bool {
        let ops: Option<Vec<&Operation>> = self.order.iter().map(|id| h.op(id)).collect();
        ops.is_some_and(|ops| ops.len() == h.len() && check_sequential_spec(ops).is_none())
    }
}

struct Search<'a> {
    ops: &'a [Operation],
    preds: Vec<u32>,
    failed: HashSet<(u32, Vec<RecordId>)>,
    state: Vec<RecordId>,
    order: Vec<usize>,
}

impl Search<'_> {
    fn dfs(&mut self, placed: u32) -> bool {
        if placed.count_ones() as usize == self.ops.len() {
            return true;
        }
        if self.failed.contains(&(placed, self.state.clone())) {
            return false;
        }
        for i in 0..self.ops.len() {
            let bit = 1u32 << i;
            if placed & bit != 0 || self.preds[i] & !placed != 0 {
                continue;
            }
            match &self.ops[i].body {
                OpBody::Get { returned } => {
                    if *returned != self.state {
                        continue;
                    }
                    self.order.push(i);
                    if self.dfs(placed | bit) {
                        return true;
                    }
                    self.order.pop();
                }
                OpBody::Append { record, result } => {
                    if *result == Some(crate::ledger::AppendResult::Nack) || self.state.contains(&record.tau) {
                        continue;
                    }
                    self.state.push(record.tau);
                    self.order.push(i);
                    if self.dfs(placed | bit) {
                        return true;
                    }
                    self.order.pop();
                    self.state.pop();
                }
            }
        }
        self.failed.insert((placed, self.state.clone()));
        false
    }
}

/// Searches all permutations of `h` that respect `constraint` for one that
/// follows the sequential ledger specification.
pub fn brute_force_oracle(
    h: &CompletedHistory,
    constraint: OrderConstraint,
) -> Result<Option<Linearization>, CapacityError> {
    if h.len() > ORACLE_LIMIT {
        return Err(CapacityError {
            ops: h.len(),
            limit: ORACLE_LIMIT,
        });
    }
    let ops = &h.ops;
    let preds = ops
        .iter()
        .map(|b| {
            ops.iter().enumerate().fold(0u32, |acc, (j, a)| {
                let edge = a.precedes(b)
                    && (constraint == OrderConstraint::RealTime || a.client == b.client);
                if edge {
                    acc | (1 << j)
                } else {
                    acc
                }
            })
        })
        .collect();
    let mut search = Search {
        ops,
        preds,
        failed: HashSet::new(),
        state: Vec::new(),
        order: Vec::new(),
    };
    Ok(search.dfs(0).then(|| Linearization {
        order: search.order.iter().map(|&i| ops[i].id.clone()).collect(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{AppendResult, Record};

    fn append(client: u32, inv: usize, resp: usize) -> Operation {
        Operation {
            id: format!("op{client}:1"),
            client,
            c: 1,
            invoke: inv,
            response: Some(resp),
            invoke_t: 0,
            response_t: Some(0),
            body: OpBody::Append {
                record: Record::new(RecordId::new(client, 1), "x"),
                result: Some(AppendResult::Ack),
            },
        }
    }

    fn get(client: u32, c: u64, inv: usize, resp: usize, taus: &[u32]) -> Operation {
        Operation {
            id: format!("op{client}:{c}"),
            c,
            body: OpBody::Get {
                returned: taus.iter().map(|p| RecordId::new(*p, 1)).collect(),
            },
            ..append(client, inv, resp)
        }
    }

    #[test]
    fn concurrent_appends_follow_the_returned_order() {
        let h = CompletedHistory::new(vec![append(1, 0, 2), append(2, 1, 3), get(0, 1, 4, 5, &[2, 1])]);
        let lin = brute_force_oracle(&h, OrderConstraint::RealTime).unwrap().unwrap();
        assert_eq!(lin.order, vec!["op2:1", "op1:1", "op0:1"]);
        assert!(lin.replays(&h));
    }

    #[test]
    fn shrinking_gets_have_no_linearization() {
        let h = CompletedHistory::new(vec![
            append(1, 0, 1),
            get(0, 1, 2, 3, &[1]),
            get(2, 1, 4, 5, &[]),
        ]);
        assert_eq!(brute_force_oracle(&h, OrderConstraint::RealTime).unwrap(), None);
        // different processes: the empty get can be placed first
        assert!(brute_force_oracle(&h, OrderConstraint::PerProcess).unwrap().is_some());
    }

    #[test]
    fn empty_history_has_the_empty_order() {
        let lin = brute_force_oracle(&CompletedHistory::default(), OrderConstraint::RealTime)
            .unwrap()
            .unwrap();
        assert!(lin.order.is_empty());
    }

    #[test]
    fn oversized_history_is_refused() {
        let ops = (0..13).map(|i| get(i, 1, 0, 1, &[])).collect();
        let err = brute_force_oracle(&CompletedHistory::new(ops), OrderConstraint::RealTime).unwrap_err();
        assert_eq!(err, CapacityError { ops: 13, limit: 12 });
    }
}
