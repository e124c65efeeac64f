//! The ledger object on its own: get/append, and a validated ledger that
//! rejects overdrafts.

use std::collections::BTreeMap;

use ledgerlab::ledger::{filter_valid, Transfer};
use ledgerlab::{Ledger, Record, RecordId, ValidatedLedger, ValidityPredicate};

fn main() {
    let mut ledger = Ledger::new();
    for (i, payload) in ["genesis", "hello", "world"].into_iter().enumerate() {
        ledger.append(Record::new(RecordId::new(0, i as u64 + 1), payload)).unwrap();
    }
    let ids: Vec<String> = ledger.get().taus().iter().map(ToString::to_string).collect();
    println!("get() = {ids:?}");

    let pred = ValidityPredicate::AccountBalance {
        initial: BTreeMap::from([("alice".to_string(), 10)]),
    };
    let transfers = [
        Transfer::Withdraw { account: "alice".into(), amount: 4 },
        Transfer::Withdraw { account: "alice".into(), amount: 7 },
        Transfer::Deposit { account: "alice".into(), amount: 5 },
        Transfer::Withdraw { account: "alice".into(), amount: 7 },
    ];
    let mut validated = ValidatedLedger::new(pred.clone());
    let mut plain = Ledger::new();
    for (i, t) in transfers.iter().enumerate() {
        let r = Record::new(RecordId::new(1, i as u64 + 1), t.payload());
        let res = validated.append(r.clone()).unwrap();
        plain.append(r).unwrap();
        println!("append({}) -> {res:?}", t.payload());
    }
    let kept: Vec<String> = validated.get().iter().map(|r| r.payload.clone()).collect();
    println!("validated get() = {kept:?}");
    // storing everything and filtering on read gives the same sequence
    assert_eq!(filter_valid(plain.sequence(), &pred), validated.get());
    println!("filter_valid(plain) matches");
}
