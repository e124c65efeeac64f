//! Sequential ledger objects and the record model.
//!
//! A [`Ledger`] holds a totally ordered [`RecordSequence`] and supports `get`
//! and `append`. A [`ValidatedLedger`] additionally filters every append
//! through a [`ValidityPredicate`] evaluated on the extended sequence and
//! answers [`AppendResult::Nack`] when the extension would be invalid.
//!
//! These objects are the reference semantics that the checkers replay and
//! the replica state held by every simulated server.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a client process (the creator of a record).
pub type ProcessId = u32;

/// Globally unique record identifier: the creator and a per-creator counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordId {
    pub creator: ProcessId,
    pub counter: u64,
}

impl RecordId {
    pub fn new(creator: ProcessId, counter: u64) -> Self {
        Self { creator, counter }
    }
}

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}:{}", self.creator, self.counter)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed record id {0:?} (expected r<creator>:<counter>)")]
pub struct ParseRecordIdError(String);

impl FromStr for RecordId {
    type Err = ParseRecordIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRecordIdError(s.to_string());
        let rest = s.strip_prefix('r').ok_or_else(err)?;
        let (creator, counter) = rest.split_once(':').ok_or_else(err)?;
        Ok(Self {
            creator: creator.parse().map_err(|_| err())?,
            counter: counter.parse().map_err(|_| err())?,
        })
    }
}

impl Serialize for RecordId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RecordId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A ledger record: unique id, creator and opaque payload.
///
/// Equality and hashing look at the id only; two records with the same id
/// are the same record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    pub tau: RecordId,
    pub payload: String,
}

impl Record {
    pub fn new(tau: RecordId, payload: impl Into<String>) -> Self {
        Self {
            tau,
            payload: payload.into(),
        }
    }

    pub fn creator(&self) -> ProcessId {
        self.tau.creator
    }
}

impl PartialEq for Record {
    fn eq(&self, other: &Self) -> bool {
        self.tau == other.tau
    }
}

impl Eq for Record {}

impl std::hash::Hash for Record {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.tau.hash(state);
    }
}

/// An ordered, duplicate-free sequence of records.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Record>", into = "Vec<Record>")]
pub struct RecordSequence {
    items: Vec<Record>,
    index: HashSet<RecordId>,
}

impl From<Vec<Record>> for RecordSequence {
    // Duplicates past the first occurrence are dropped.
    fn from(records: Vec<Record>) -> Self {
        let mut seq = Self::default();
        for r in records {
            if !seq.contains(&r.tau) {
                seq.push_unchecked(r);
            }
        }
        seq
    }
}

impl From<RecordSequence> for Vec<Record> {
    fn from(seq: RecordSequence) -> Self {
        seq.items
    }
}

impl PartialEq for RecordSequence {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
    }
}

impl Eq for RecordSequence {}

impl RecordSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, tau: &RecordId) -> bool {
        self.index.contains(tau)
    }

    pub fn records(&self) -> &[Record] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Record> {
        self.items.iter()
    }

    pub fn taus(&self) -> Vec<RecordId> {
        self.items.iter().map(|r| r.tau).collect()
    }

    pub fn first(&self) -> Option<&Record> {
        self.items.first()
    }

    /// Appends `r`, refusing a record id that is already present.
    pub fn push(&mut self, r: Record) -> Result<(), LedgerError> {
        if self.contains(&r.tau) {
            return Err(LedgerError::DuplicateRecord(r.tau));
        }
        self.push_unchecked(r);
        Ok(())
    }

    fn push_unchecked(&mut self, r: Record) {
        self.index.insert(r.tau);
        self.items.push(r);
    }

    /// `self ‖ r` as a plain vector, for predicate evaluation.
    fn extended_with(&self, r: &Record) -> Vec<Record> {
        let mut v = Vec::with_capacity(self.items.len() + 1);
        v.extend(self.items.iter().cloned());
        v.push(r.clone());
        v
    }
}

impl<'a> IntoIterator for &'a RecordSequence {
    type Item = &'a Record;
    type IntoIter = std::slice::Iter<'a, Record>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AppendResult {
    Ack,
    Nack,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("record {0} is already in the ledger")]
    DuplicateRecord(RecordId),
}

/// Boolean validity check over a whole record sequence.
///
/// The predicate sees complete records (id, creator and payload), not just
/// payloads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValidityPredicate {
    AlwaysTrue,
    UniqueTau,
    /// Payloads are `deposit:<acct>:<amount>` or `withdraw:<acct>:<amount>`;
    /// valid iff no prefix of the replay drives an account below zero.
    /// Accounts missing from `initial` start at zero.
    AccountBalance {
        #[serde(default)]
        initial: BTreeMap<String, u64>,
    },
}

/// A parsed account-balance payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transfer {
    Deposit { account: String, amount: u64 },
    Withdraw { account: String, amount: u64 },
}

impl Transfer {
    pub fn parse(payload: &str) -> Option<Self> {
        let mut parts = payload.splitn(3, ':');
        let op = parts.next()?;
        let account = parts.next()?;
        let amount: u64 = parts.next()?.parse().ok()?;
        if account.is_empty() {
            return None;
        }
        let account = account.to_string();
        match op {
            "deposit" => Some(Self::Deposit { account, amount }),
            "withdraw" => Some(Self::Withdraw { account, amount }),
            _ => None,
        }
    }

    pub fn payload(&self) -> String {
        match self {
            Self::Deposit { account, amount } => format!("deposit:{account}:{amount}"),
            Self::Withdraw { account, amount } => format!("withdraw:{account}:{amount}"),
        }
    }
}

impl ValidityPredicate {
    pub fn evaluate(&self, records: &[Record]) -> bool {
        match self {
            Self::AlwaysTrue => true,
            Self::UniqueTau => {
                let mut seen = HashSet::with_capacity(records.len());
                records.iter().all(|r| seen.insert(r.tau))
            }
            Self::AccountBalance { initial } => {
                let mut balances: BTreeMap<String, i128> = initial
                    .iter()
                    .map(|(k, v)| (k.clone(), i128::from(*v)))
                    .collect();
                for r in records {
                    let Some(transfer) = Transfer::parse(&r.payload) else {
                        log::debug!("account_balance: unparseable payload {:?} in {}", r.payload, r.tau);
                        return false;
                    };
                    let (account, delta) = match transfer {
                        Transfer::Deposit { account, amount } => (account, i128::from(amount)),
                        Transfer::Withdraw { account, amount } => (account, -i128::from(amount)),
                    };
                    let balance = balances.entry(account).or_insert(0);
                    *balance += delta;
                    if *balance < 0 {
                        return false;
                    }
                }
                true
            }
        }
    }
}

/// Evaluates `pred` on `s`.
pub fn evaluate_predicate(pred: &ValidityPredicate, s: &RecordSequence) -> bool {
    pred.evaluate(s.records())
}

/// Keeps each record of `s`, left to right, iff the kept-so-far sequence
/// extended with it is valid.
pub fn filter_valid(s: &RecordSequence, pred: &ValidityPredicate) -> RecordSequence {
    let mut kept: Vec<Record> = Vec::with_capacity(s.len());
    for r in s {
        kept.push(r.clone());
        if !pred.evaluate(&kept) {
            kept.pop();
        }
    }
    RecordSequence::from(kept)
}

/// The plain (non-replicated) ledger object.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ledger {
    seq: RecordSequence,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> RecordSequence {
        self.seq.clone()
    }

    pub fn append(&mut self, r: Record) -> Result<AppendResult, LedgerError> {
        self.seq.push(r)?;
        Ok(AppendResult::Ack)
    }

    pub fn sequence(&self) -> &RecordSequence {
        &self.seq
    }
}

/// A ledger whose appends are admitted only if the extended sequence is valid.
#[derive(Debug, Clone)]
pub struct ValidatedLedger {
    seq: RecordSequence,
    pred: ValidityPredicate,
}

impl ValidatedLedger {
    pub fn new(pred: ValidityPredicate) -> Self {
        Self {
            seq: RecordSequence::new(),
            pred,
        }
    }

    pub fn get(&self) -> RecordSequence {
        self.seq.clone()
    }

    pub fn append(&mut self, r: Record) -> Result<AppendResult, LedgerError> {
        vledger_append(&mut self.seq, r, &self.pred)
    }

    pub fn predicate(&self) -> &ValidityPredicate {
        &self.pred
    }

    pub fn sequence(&self) -> &RecordSequence {
        &self.seq
    }
}

pub fn ledger_get(state: &RecordSequence) -> RecordSequence {
    state.clone()
}

pub fn ledger_append(state: &mut RecordSequence, r: Record) -> Result<AppendResult, LedgerError> {
    state.push(r)?;
    Ok(AppendResult::Ack)
}

pub fn vledger_append(
    state: &mut RecordSequence,
    r: Record,
    pred: &ValidityPredicate,
) -> Result<AppendResult, LedgerError> {
    if state.contains(&r.tau) {
        return Err(LedgerError::DuplicateRecord(r.tau));
    }
    if pred.evaluate(&state.extended_with(&r)) {
        state.push_unchecked(r);
        Ok(AppendResult::Ack)
    } else {
        Ok(AppendResult::Nack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(creator: ProcessId, counter: u64, payload: &str) -> Record {
        Record::new(RecordId::new(creator, counter), payload)
    }

    fn balance(initial: &[(&str, u64)]) -> ValidityPredicate {
        ValidityPredicate::AccountBalance {
            initial: initial.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    #[test]
    fn get_on_fresh_ledger_is_empty() {
        assert!(ledger_get(&RecordSequence::new()).is_empty());
    }

    #[test]
    fn appends_are_returned_in_call_order() {
        let mut l = Ledger::new();
        let r1 = rec(0, 1, "a");
        let r2 = rec(1, 1, "b");
        assert_eq!(l.append(r1.clone()), Ok(AppendResult::Ack));
        assert_eq!(l.get().records(), &[r1.clone()]);
        assert_eq!(l.append(r2.clone()), Ok(AppendResult::Ack));
        assert_eq!(l.get().records(), &[r1, r2]);
    }

    #[test]
    fn duplicate_append_is_an_error_not_a_nack() {
        let mut s = RecordSequence::new();
        let r1 = rec(0, 1, "a");
        ledger_append(&mut s, r1.clone()).unwrap();
        assert_eq!(
            ledger_append(&mut s, r1.clone()),
            Err(LedgerError::DuplicateRecord(r1.tau))
        );
        assert_eq!(s.len(), 1);
        assert_eq!(
            vledger_append(&mut s, r1.clone(), &ValidityPredicate::AlwaysTrue),
            Err(LedgerError::DuplicateRecord(r1.tau))
        );
    }

    #[test]
    fn record_equality_is_by_id() {
        assert_eq!(rec(3, 4, "x"), rec(3, 4, "y"));
        assert_ne!(rec(3, 4, "x"), rec(3, 5, "x"));
    }

    #[test]
    fn record_id_round_trips_through_text() {
        let id = RecordId::new(12, 345);
        assert_eq!(id.to_string(), "r12:345");
        assert_eq!("r12:345".parse::<RecordId>(), Ok(id));
        assert!("12:345".parse::<RecordId>().is_err());
        assert!("r12".parse::<RecordId>().is_err());
        assert!("rx:1".parse::<RecordId>().is_err());
    }

    #[test]
    fn validated_append_acks_and_nacks_by_balance() {
        let pred = balance(&[("A", 0)]);
        let mut s = RecordSequence::new();
        // balance 5 >= 0
        assert_eq!(
            vledger_append(&mut s, rec(0, 1, "deposit:A:5"), &pred),
            Ok(AppendResult::Ack)
        );
        assert_eq!(s.taus(), vec![RecordId::new(0, 1)]);
        // balance 5 - 7 = -2 < 0
        assert_eq!(
            vledger_append(&mut s, rec(0, 2, "withdraw:A:7"), &pred),
            Ok(AppendResult::Nack)
        );
        assert_eq!(s.taus(), vec![RecordId::new(0, 1)]);
    }

    #[test]
    fn always_true_always_acks() {
        let mut vl = ValidatedLedger::new(ValidityPredicate::AlwaysTrue);
        for i in 0..5 {
            assert_eq!(vl.append(rec(1, i, "garbage")), Ok(AppendResult::Ack));
        }
        assert_eq!(vl.get().len(), 5);
    }

    #[test]
    fn predicate_examples() {
        let any = RecordSequence::from(vec![rec(0, 1, "x"), rec(0, 2, "y")]);
        assert!(evaluate_predicate(&ValidityPredicate::AlwaysTrue, &any));

        let r1 = rec(0, 1, "x");
        assert!(!ValidityPredicate::UniqueTau.evaluate(&[r1.clone(), r1.clone()]));
        assert!(ValidityPredicate::UniqueTau.evaluate(&[r1, rec(0, 2, "x")]));

        // 5 - 3 = 2
        let ok = [rec(0, 1, "deposit:A:5"), rec(0, 2, "withdraw:A:3")];
        assert!(balance(&[("A", 0)]).evaluate(&ok));
    }

    #[test]
    fn malformed_balance_payload_is_invalid() {
        let pred = balance(&[]);
        for bad in ["deposit:A", "pay:A:3", "deposit:A:-3", "deposit::3", "deposit:A:x", ""] {
            assert!(!pred.evaluate(&[rec(0, 1, bad)]), "{bad:?}");
        }
    }

    #[test]
    fn unknown_accounts_start_at_zero() {
        let pred = balance(&[]);
        assert!(pred.evaluate(&[rec(0, 1, "deposit:B:1"), rec(0, 2, "withdraw:B:1")]));
        assert!(!pred.evaluate(&[rec(0, 1, "withdraw:B:1")]));
        assert!(balance(&[("B", 1)]).evaluate(&[rec(0, 1, "withdraw:B:1")]));
    }

    #[test]
    fn filter_valid_examples() {
        let pred = balance(&[("A", 0)]);
        assert!(filter_valid(&RecordSequence::new(), &pred).is_empty());

        let s = RecordSequence::from(vec![
            rec(0, 1, "deposit:A:5"),
            rec(0, 2, "withdraw:A:7"),
            rec(0, 3, "withdraw:A:3"),
        ]);
        // withdraw 7 is skipped at balance 5, withdraw 3 leaves 2
        assert_eq!(
            filter_valid(&s, &pred).taus(),
            vec![RecordId::new(0, 1), RecordId::new(0, 3)]
        );
        assert_eq!(filter_valid(&s, &ValidityPredicate::AlwaysTrue), s);
    }

    #[test]
    fn sequence_serializes_as_plain_list() {
        let s = RecordSequence::from(vec![rec(1, 2, "p")]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"[{"tau":"r1:2","payload":"p"}]"#);
        let back: RecordSequence = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(back.contains(&RecordId::new(1, 2)));
    }

    #[test]
    fn predicate_json_shape() {
        let p: ValidityPredicate =
            serde_json::from_str(r#"{"kind":"account_balance","initial":{"A":3}}"#).unwrap();
        assert_eq!(p, balance(&[("A", 3)]));
        let p: ValidityPredicate = serde_json::from_str(r#"{"kind":"unique_tau"}"#).unwrap();
        assert_eq!(p, ValidityPredicate::UniqueTau);
        assert!(serde_json::from_str::<ValidityPredicate>(r#"{"kind":"nope"}"#).is_err());
    }
}
