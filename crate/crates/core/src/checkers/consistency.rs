use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ledger::{filter_valid, AppendResult, Record, RecordId, RecordSequence, ValidityPredicate};
use crate::verdict::{CheckerKind, Property, Verdict};

use super::history::{complete_history, CompletedHistory, OpBody, Operation, PartialHistory};
use super::oracle::{brute_force_oracle, OrderConstraint, ORACLE_LIMIT};
use super::properties::{
    append_order, append_visible, duplicates, fabrication, get_monotone, no_future_record, prefix_chain,
    probe_completeness, Scope, Violation,
};
use super::spec::check_validated_spec;
use super::CheckError;

/// Histories up to this many operations are also checked by the oracle
/// under [`OracleMode::Auto`].
pub const ORACLE_AUTO_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMode {
    Never,
    /// Run the oracle on histories of at most [`ORACLE_AUTO_LIMIT`] operations.
    #[default]
    Auto,
    /// Always run it; larger histories than [`ORACLE_LIMIT`] are an error.
    Always,
}

fn basic(h: &CompletedHistory) -> Option<Violation> {
    fabrication(h).or_else(|| duplicates(h)).or_else(|| prefix_chain(h))
}

fn realtime_properties(h: &CompletedHistory, scope: Scope) -> Option<Violation> {
    basic(h)
        .or_else(|| append_order(h, scope))
        .or_else(|| match scope {
            Scope::RealTime => append_visible(h, scope),
            Scope::SameProcess => no_future_record(h, scope),
        })
        .or_else(|| match scope {
            Scope::RealTime => get_monotone(h, scope),
            Scope::SameProcess => append_visible(h, scope),
        })
        .or_else(|| match scope {
            Scope::RealTime => no_future_record(h, scope),
            Scope::SameProcess => get_monotone(h, scope),
        })
}

/// Fabrication, Duplicate, PrefixChain, then A1 to A4.
pub fn atomic_violation(h: &CompletedHistory) -> Option<Violation> {
    realtime_properties(h, Scope::RealTime)
}

/// Fabrication, Duplicate, PrefixChain, then S1 to S4.
pub fn sequential_violation(h: &CompletedHistory) -> Option<Violation> {
    realtime_properties(h, Scope::SameProcess)
}

/// Order-free consistency plus probe completeness.
pub fn eventual_violation(h: &CompletedHistory, probes: &BTreeSet<String>) -> Option<Violation> {
    basic(h).or_else(|| probe_completeness(h, probes))
}

fn to_verdict(kind: CheckerKind, v: Option<Violation>) -> Verdict {
    v.map_or_else(|| Verdict::pass(kind), |v| v.into_verdict(kind))
}

pub fn check_atomic(h: &CompletedHistory) -> Verdict {
    to_verdict(CheckerKind::Atomic, atomic_violation(h))
}

pub fn check_sequential_consistency(h: &CompletedHistory) -> Verdict {
    to_verdict(CheckerKind::Sequential, sequential_violation(h))
}

pub fn check_eventual(h: &CompletedHistory, probes: &BTreeSet<String>) -> Result<Verdict, CheckError> {
    if !h.gets().any(|g| probes.contains(&g.id)) {
        return Err(CheckError::NoProbes);
    }
    Ok(to_verdict(CheckerKind::Eventual, eventual_violation(h, probes)))
}

/// A permutation following the sequential specification, built from the
/// longest returned sequence: appends in that order, each get right after
/// the last record it returned, appends never returned at the end.
/// Requires [`fabrication`], [`duplicates`] and [`prefix_chain`] to pass.
pub fn eventual_order(h: &CompletedHistory) -> Vec<&Operation> {
    let longest: &[RecordId] = h
        .gets()
        .filter_map(Operation::returned)
        .max_by_key(|r| r.len())
        .unwrap_or_default();
    let by_tau: HashMap<RecordId, &Operation> = h
        .appends()
        .map(|a| (a.record().expect("append").tau, a))
        .collect();
    let mut by_len: BTreeMap<usize, Vec<&Operation>> = BTreeMap::new();
    for g in h.gets() {
        by_len.entry(g.returned().map_or(0, <[_]>::len)).or_default().push(g);
    }
    let mut order = Vec::with_capacity(h.len());
    for i in 0..=longest.len() {
        order.extend(by_len.remove(&i).unwrap_or_default());
        if let Some(tau) = longest.get(i) {
            order.push(by_tau[tau]);
        }
    }
    let placed: BTreeSet<&RecordId> = longest.iter().collect();
    order.extend(h.appends().filter(|a| !placed.contains(&a.record().expect("append").tau)));
    order
}

/// Checks the client-side validated views of a run that stores every record
/// and filters on get. Each view must equal the filtered raw result, and
/// the views together with the effective append results (kept or dropped by
/// the filter) must replay through the validated ledger.
pub fn validated_violation(
    h: &CompletedHistory,
    pred: &ValidityPredicate,
    views: &BTreeMap<String, Vec<RecordId>>,
) -> Result<Option<Violation>, CheckError> {
    if let Some(v) = basic(h) {
        return Ok(Some(v));
    }
    let records: HashMap<RecordId, &Record> = h
        .appends()
        .filter_map(|a| a.record().map(|r| (r.tau, r)))
        .collect();
    let raw = |taus: &[RecordId]| RecordSequence::from(taus.iter().map(|t| records[t].clone()).collect::<Vec<_>>());
    for g in h.gets() {
        let view = views.get(&g.id).ok_or_else(|| CheckError::MissingView(g.id.clone()))?;
        if filter_valid(&raw(g.returned().unwrap_or_default()), pred).taus() != *view {
            return Ok(Some(Violation::new(Property::SeqSpec, vec![g.id.clone()])));
        }
    }
    let order = eventual_order(h);
    let longest = order
        .iter()
        .filter_map(|o| o.returned())
        .max_by_key(|r| r.len())
        .unwrap_or_default();
    let kept: BTreeSet<RecordId> = filter_valid(&raw(longest), pred).taus().into_iter().collect();
    let in_ledger: BTreeSet<&RecordId> = longest.iter().collect();
    let mut replay = Vec::with_capacity(order.len());
    for op in order {
        let mut op = op.clone();
        match &mut op.body {
            OpBody::Get { returned } => *returned = views[&op.id].clone(),
            OpBody::Append { record, result } => {
                if !in_ledger.contains(&record.tau) {
                    continue;
                }
                *result = Some(if kept.contains(&record.tau) {
                    AppendResult::Ack
                } else {
                    AppendResult::Nack
                });
            }
        }
        replay.push(op);
    }
    Ok(check_validated_spec(&replay, pred))
}

fn oracle_enabled(mode: OracleMode, h: &CompletedHistory) -> Result<bool, CheckError> {
    match mode {
        OracleMode::Never => Ok(false),
        OracleMode::Auto => Ok(h.len() <= ORACLE_AUTO_LIMIT),
        OracleMode::Always if h.len() > ORACLE_LIMIT => Err(CheckError::Capacity {
            ops: h.len(),
            limit: ORACLE_LIMIT,
        }),
        OracleMode::Always => Ok(true),
    }
}

/// Property verdict, cross-checked against the oracle when enabled.
fn with_oracle(
    kind: CheckerKind,
    h: &CompletedHistory,
    violation: Option<Violation>,
    constraint: OrderConstraint,
    mode: OracleMode,
) -> Result<Verdict, CheckError> {
    if !oracle_enabled(mode, h)? {
        return Ok(to_verdict(kind, violation));
    }
    let found = brute_force_oracle(h, constraint)
        .map_err(|e| CheckError::Capacity {
            ops: e.ops,
            limit: e.limit,
        })?
        .is_some();
    let verdict = match (violation, found) {
        (None, true) => Verdict::pass(kind),
        (Some(v), false) => v.into_verdict(kind),
        (None, false) => Verdict::divergence(
            kind,
            Some(Property::Linearization),
            h.ops.iter().map(|o| o.id.clone()).collect(),
        ),
        (Some(v), true) => Verdict::divergence(kind, Some(v.property), v.witness),
    };
    Ok(verdict.with_oracle(true))
}

/// What to check a partial history for.
#[derive(Debug, Clone, Copy)]
pub enum Check<'a> {
    Atomic(OracleMode),
    Sequential(OracleMode),
    Eventual {
        probes: &'a BTreeSet<String>,
    },
    Validated {
        predicate: &'a ValidityPredicate,
        views: &'a BTreeMap<String, Vec<RecordId>>,
    },
}

fn check_one(h: &CompletedHistory, check: Check<'_>) -> Result<Verdict, CheckError> {
    match check {
        Check::Atomic(mode) => with_oracle(
            CheckerKind::Atomic,
            h,
            atomic_violation(h),
            OrderConstraint::RealTime,
            mode,
        ),
        Check::Sequential(mode) => with_oracle(
            CheckerKind::Sequential,
            h,
            sequential_violation(h),
            OrderConstraint::PerProcess,
            mode,
        ),
        Check::Eventual { probes } => check_eventual(h, probes),
        Check::Validated { predicate, views } => Ok(to_verdict(
            CheckerKind::Vspec,
            validated_violation(h, predicate, views)?,
        )),
    }
}

/// Checks every completion of `h`; the history passes if one of them does.
/// Otherwise the verdict of the completion keeping all pending appends is
/// returned.
pub fn check_partial(h: &PartialHistory, check: Check<'_>) -> Result<Verdict, CheckError> {
    let mut first = None;
    for candidate in complete_history(h)? {
        let v = check_one(&candidate, check)?;
        if v.is_pass() {
            return Ok(v);
        }
        first.get_or_insert(v);
    }
    Ok(first.expect("at least one completion"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::ProcessId;
    use crate::sim::{History, HistoryEvent};
    use crate::verdict::Status;

    fn r(p: ProcessId, c: u64) -> RecordId {
        RecordId::new(p, c)
    }

    fn partial(events: Vec<HistoryEvent>) -> PartialHistory {
        PartialHistory::from_history(&History { events }).unwrap()
    }

    fn completed(events: Vec<HistoryEvent>) -> CompletedHistory {
        complete_history(&partial(events)).unwrap().remove(0)
    }

    fn stale_read() -> Vec<HistoryEvent> {
        vec![
            HistoryEvent::invoke_append(1, 1, 0, "a"),
            HistoryEvent::append_response(1, 1, 1, AppendResult::Ack),
            HistoryEvent::invoke_get(0, 1, 2),
            HistoryEvent::get_response(0, 1, 3, vec![]),
        ]
    }

    #[test]
    fn own_append_then_empty_get_fails_a2() {
        let h = completed(vec![
            HistoryEvent::invoke_append(0, 1, 0, "a"),
            HistoryEvent::append_response(0, 1, 1, AppendResult::Ack),
            HistoryEvent::invoke_get(0, 2, 2),
            HistoryEvent::get_response(0, 2, 3, vec![]),
        ]);
        assert!(check_atomic(&h).fails_at(Property::A2));
    }

    #[test]
    fn cross_client_staleness_separates_atomic_from_sequential() {
        let h = completed(stale_read());
        assert!(check_atomic(&h).fails_at(Property::A2));
        assert!(check_sequential_consistency(&h).is_pass());
        let v = check_partial(&partial(stale_read()), Check::Sequential(OracleMode::Always)).unwrap();
        assert!(v.is_pass() && v.oracle_used);
        let v = check_partial(&partial(stale_read()), Check::Atomic(OracleMode::Always)).unwrap();
        assert_eq!(v.status, Status::Fail);
        assert!(v.oracle_used);
    }

    #[test]
    fn own_reads_that_shrink_fail_s4() {
        let h = completed(vec![
            HistoryEvent::invoke_append(1, 1, 0, "a"),
            HistoryEvent::append_response(1, 1, 1, AppendResult::Ack),
            HistoryEvent::invoke_get(0, 1, 2),
            HistoryEvent::get_response(0, 1, 3, vec![r(1, 1)]),
            HistoryEvent::invoke_get(0, 2, 4),
            HistoryEvent::get_response(0, 2, 5, vec![]),
        ]);
        assert!(check_sequential_consistency(&h).fails_at(Property::S4));
    }

    #[test]
    fn pending_append_that_was_read_needs_the_including_completion() {
        let events = vec![
            HistoryEvent::invoke_append(1, 1, 0, "a"),
            HistoryEvent::invoke_get(0, 1, 1),
            HistoryEvent::get_response(0, 1, 2, vec![r(1, 1)]),
        ];
        let cands = complete_history(&partial(events.clone())).unwrap();
        assert!(check_atomic(&cands[0]).is_pass());
        assert!(check_atomic(&cands[1]).fails_at(Property::Fabrication));
        assert!(check_partial(&partial(events), Check::Atomic(OracleMode::Always))
            .unwrap()
            .is_pass());
    }

    #[test]
    fn eventual_checker_needs_probes() {
        let h = completed(stale_read());
        assert!(matches!(check_eventual(&h, &BTreeSet::new()), Err(CheckError::NoProbes)));
    }

    #[test]
    fn stale_workload_get_with_complete_probes_is_eventually_consistent() {
        let mut events = stale_read();
        events.push(HistoryEvent::invoke_get(0, 2, 4));
        events.push(HistoryEvent::get_response(0, 2, 5, vec![r(1, 1)]));
        let probes = BTreeSet::from(["op0:2".to_string()]);
        let h = completed(events);
        assert!(check_eventual(&h, &probes).unwrap().is_pass());
        assert!(check_atomic(&h).fails_at(Property::A2));
    }

    #[test]
    fn eventual_order_replays() {
        let h = completed(vec![
            HistoryEvent::invoke_append(1, 1, 0, "a"),
            HistoryEvent::invoke_append(2, 1, 0, "b"),
            HistoryEvent::append_response(1, 1, 1, AppendResult::Ack),
            HistoryEvent::append_response(2, 1, 1, AppendResult::Ack),
            HistoryEvent::invoke_get(0, 1, 2),
            HistoryEvent::get_response(0, 1, 3, vec![r(2, 1), r(1, 1)]),
            HistoryEvent::invoke_get(3, 1, 3),
            HistoryEvent::get_response(3, 1, 4, vec![r(2, 1)]),
        ]);
        let order = eventual_order(&h);
        let ids: Vec<&str> = order.iter().map(|o| o.id.as_str()).collect();
        assert_eq!(ids, vec!["op2:1", "op3:1", "op1:1", "op0:1"]);
        assert!(super::super::spec::check_sequential_spec(order).is_none());
    }

    #[test]
    fn divergence_is_reported_when_the_oracle_disagrees() {
        // The get misses the earlier of two ordered appends; the oracle
        // rejects it, so a clean property result must come back as a
        // divergence.
        let h = completed(vec![
            HistoryEvent::invoke_append(1, 1, 0, "a"),
            HistoryEvent::append_response(1, 1, 1, AppendResult::Ack),
            HistoryEvent::invoke_get(0, 1, 1),
            HistoryEvent::invoke_append(2, 1, 2, "b"),
            HistoryEvent::append_response(2, 1, 3, AppendResult::Ack),
            HistoryEvent::get_response(0, 1, 4, vec![r(2, 1)]),
        ]);
        let v = with_oracle(
            CheckerKind::Atomic,
            &h,
            None,
            OrderConstraint::RealTime,
            OracleMode::Always,
        )
        .unwrap();
        assert_eq!(v.status, Status::Divergence);
        assert_eq!(v.violated, Some(Property::Linearization));
        assert!(check_atomic(&h).fails_at(Property::A1));
    }

    #[test]
    fn validated_views_replay_with_effective_results() {
        let pred = ValidityPredicate::AccountBalance { initial: BTreeMap::new() };
        let events = vec![
            HistoryEvent::invoke_append(0, 1, 0, "deposit:A:5"),
            HistoryEvent::append_response(0, 1, 1, AppendResult::Ack),
            HistoryEvent::invoke_append(0, 2, 2, "withdraw:A:7"),
            HistoryEvent::append_response(0, 2, 3, AppendResult::Ack),
            HistoryEvent::invoke_get(0, 3, 4),
            HistoryEvent::get_response(0, 3, 5, vec![r(0, 1), r(0, 2)]),
        ];
        let good = BTreeMap::from([("op0:3".to_string(), vec![r(0, 1)])]);
        let h = partial(events);
        let v = check_partial(&h, Check::Validated { predicate: &pred, views: &good }).unwrap();
        assert!(v.is_pass());
        let bad = BTreeMap::from([("op0:3".to_string(), vec![r(0, 1), r(0, 2)])]);
        let v = check_partial(&h, Check::Validated { predicate: &pred, views: &bad }).unwrap();
        assert!(v.fails_at(Property::SeqSpec));
        let none = BTreeMap::new();
        assert!(matches!(
            check_partial(&h, Check::Validated { predicate: &pred, views: &none }),
            Err(CheckError::MissingView(_))
        ));
    }
}
