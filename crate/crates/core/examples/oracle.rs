//! The exhaustive oracle next to the property checks on a tiny history.

use ledgerlab::checkers::{
    atomic_violation, brute_force_oracle, complete_history, sequential_violation, OrderConstraint, PartialHistory,
};
use ledgerlab::sim::{HistoryEvent, History};
use ledgerlab::ledger::{AppendResult, RecordId};

fn main() {
    // client 1 appends r1:1; afterwards client 2 reads an empty ledger
    let mut h = History::default();
    h.push(HistoryEvent::invoke_append(1, 1, 0, "x"));
    h.push(HistoryEvent::append_response(1, 1, 2, AppendResult::Ack));
    h.push(HistoryEvent::invoke_get(2, 1, 3));
    h.push(HistoryEvent::get_response(2, 1, 4, vec![]));
    h.push(HistoryEvent::invoke_get(2, 2, 5));
    h.push(HistoryEvent::get_response(2, 2, 6, vec![RecordId::new(1, 1)]));
    print!("{}", h.to_jsonl());
    let c = complete_history(&PartialHistory::from_history(&h).unwrap()).unwrap().remove(0);
    for (name, constraint, property) in [
        ("linearizable", OrderConstraint::RealTime, atomic_violation(&c)),
        ("sequentially consistent", OrderConstraint::PerProcess, sequential_violation(&c)),
    ] {
        let lin = brute_force_oracle(&c, constraint).unwrap();
        println!("{name}: oracle {:?}, properties {:?}", lin.map(|l| l.order), property);
    }
}
