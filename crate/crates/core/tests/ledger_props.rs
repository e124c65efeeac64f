use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use ledgerlab::ledger::{
    filter_valid, AppendResult, Ledger, Record, RecordId, RecordSequence, Transfer, ValidatedLedger, ValidityPredicate,
};

fn transfer() -> impl Strategy<Value = String> {
    (any::<bool>(), 0..3usize, 1..8u64).prop_map(|(deposit, a, amount)| {
        let account = ["a", "b", "c"][a].to_string();
        let t = if deposit {
            Transfer::Deposit { account, amount }
        } else {
            Transfer::Withdraw { account, amount }
        };
        t.payload()
    })
}

/// Records with distinct ids, some payloads not parseable as transfers.
fn stream() -> impl Strategy<Value = Vec<Record>> {
    prop::collection::vec((0..4u32, prop_oneof![4 => transfer(), 1 => "[a-z]{0,4}"]), 0..40).prop_map(|v| {
        let mut counters = BTreeMap::new();
        v.into_iter()
            .map(|(p, payload)| {
                let c = counters.entry(p).or_insert(0u64);
                *c += 1;
                Record::new(RecordId::new(p, *c), payload)
            })
            .collect()
    })
}

fn predicate() -> impl Strategy<Value = ValidityPredicate> {
    prop_oneof![
        Just(ValidityPredicate::AlwaysTrue),
        Just(ValidityPredicate::UniqueTau),
        (0..10u64).prop_map(|a| ValidityPredicate::AccountBalance {
            initial: BTreeMap::from([("a".to_string(), a)]),
        }),
    ]
}

/// Balance check written directly against the payload strings.
fn balances_ok(records: &[Record], initial_a: u64) -> bool {
    let mut bal: BTreeMap<&str, i64> = BTreeMap::from([("a", initial_a as i64)]);
    for r in records {
        let parts: Vec<&str> = r.payload.split(':').collect();
        let [op, acct, amount] = parts[..] else { return false };
        let Ok(amount) = amount.parse::<i64>() else { return false };
        let b = bal.entry(acct).or_insert(0);
        match op {
            "deposit" => *b += amount,
            "withdraw" => *b -= amount,
            _ => return false,
        }
        if *b < 0 {
            return false;
        }
    }
    true
}

proptest! {
    #[test]
    fn plain_ledger_returns_appends_in_order(records in stream()) {
        let mut l = Ledger::new();
        for (i, r) in records.iter().enumerate() {
            prop_assert_eq!(l.append(r.clone()).unwrap(), AppendResult::Ack);
            prop_assert_eq!(l.get().len(), i + 1);
        }
        prop_assert_eq!(l.get().taus(), records.iter().map(|r| r.tau).collect::<Vec<_>>());
        if let Some(r) = records.first() {
            prop_assert!(l.append(r.clone()).is_err());
        }
    }

    #[test]
    fn validated_ledger_state_is_always_valid(records in stream(), pred in predicate()) {
        let mut v = ValidatedLedger::new(pred.clone());
        for r in records {
            let before = v.get();
            let res = v.append(r.clone()).unwrap();
            let after = v.get();
            match res {
                AppendResult::Ack => {
                    prop_assert_eq!(after.len(), before.len() + 1);
                    prop_assert_eq!(after.records().last(), Some(&r));
                }
                AppendResult::Nack => prop_assert_eq!(&after, &before),
            }
            prop_assert!(pred.evaluate(after.records()));
        }
    }

    #[test]
    fn account_balance_matches_a_direct_replay(records in stream(), a in 0..10u64) {
        let pred = ValidityPredicate::AccountBalance { initial: BTreeMap::from([("a".to_string(), a)]) };
        prop_assert_eq!(pred.evaluate(&records), balances_ok(&records, a));
    }

    #[test]
    fn central_and_filtered_ledgers_agree(records in stream(), pred in predicate()) {
        let mut central = ValidatedLedger::new(pred.clone());
        let mut plain = Ledger::new();
        let mut acked = BTreeSet::new();
        for r in &records {
            if central.append(r.clone()).unwrap() == AppendResult::Ack {
                acked.insert(r.tau);
            }
            plain.append(r.clone()).unwrap();
        }
        let filtered = filter_valid(plain.sequence(), &pred);
        prop_assert_eq!(central.sequence(), &filtered);
        prop_assert_eq!(filtered.taus().into_iter().collect::<BTreeSet<_>>(), acked);
    }

    #[test]
    fn filtering_is_idempotent(records in stream(), pred in predicate()) {
        let s = RecordSequence::from(records);
        let once = filter_valid(&s, &pred);
        prop_assert_eq!(&filter_valid(&once, &pred), &once);
        prop_assert!(pred.evaluate(once.records()));
    }

    #[test]
    fn filtering_commutes_with_extension(records in stream(), pred in predicate()) {
        // filtering a longer stream keeps the filtered shorter one as a prefix
        let cut = records.len() / 2;
        let short = filter_valid(&RecordSequence::from(records[..cut].to_vec()), &pred);
        let long = filter_valid(&RecordSequence::from(records), &pred);
        prop_assert_eq!(&long.records()[..short.len()], short.records());
    }

    #[test]
    fn record_ids_round_trip(p in any::<u32>(), c in any::<u64>()) {
        let id = RecordId::new(p, c);
        prop_assert_eq!(id.to_string().parse::<RecordId>().unwrap(), id);
        let json = serde_json::to_string(&id).unwrap();
        prop_assert_eq!(serde_json::from_str::<RecordId>(&json).unwrap(), id);
    }
}

#[test]
fn unparseable_payloads_are_never_admitted_under_balances() {
    let mut v = ValidatedLedger::new(ValidityPredicate::AccountBalance { initial: BTreeMap::new() });
    let r = Record::new(RecordId::new(0, 1), "hello");
    assert_eq!(v.append(r).unwrap(), AppendResult::Nack);
    assert!(v.get().is_empty());
}
