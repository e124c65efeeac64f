//! Scalable necessary conditions on ledger histories.
//!
//! Each check returns the first violation it finds, with a witness made of
//! the operation ids (and, where useful, record ids) involved. Restricting
//! the history to the witnessed operations and re-running the same check
//! reproduces the violation.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::ledger::RecordId;
use crate::verdict::{CheckerKind, Property, Verdict};

use super::history::{CompletedHistory, Operation};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub property: Property,
    pub witness: Vec<String>,
}

impl Violation {
    pub fn new(property: Property, witness: Vec<String>) -> Self {
        assert!(!witness.is_empty(), "a violation needs a witness");
        Self { property, witness }
    }

    pub fn into_verdict(self, checker: CheckerKind) -> Verdict {
        Verdict::fail(checker, self.property, self.witness)
    }
}

/// Which operation pairs a real-time check applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Every pair ordered in real time.
    RealTime,
    /// Only pairs of the same process.
    SameProcess,
}

impl Scope {
    fn ordered(self, a: &Operation, b: &Operation) -> bool {
        a.precedes(b) && (self == Scope::RealTime || a.client == b.client)
    }

    fn pick(self, real_time: Property, same_process: Property) -> Property {
        match self {
            Scope::RealTime => real_time,
            Scope::SameProcess => same_process,
        }
    }
}

fn is_prefix(a: &[RecordId], b: &[RecordId]) -> bool {
    a.len() <= b.len() && a == &b[..a.len()]
}

/// Every returned record was appended by some operation of the history.
pub fn fabrication(h: &CompletedHistory) -> Option<Violation> {
    let appended: HashSet<RecordId> = h.appends().filter_map(|a| a.record().map(|r| r.tau)).collect();
    for g in h.gets() {
        for tau in g.returned().unwrap_or_default() {
            if !appended.contains(tau) {
                return Some(Violation::new(Property::Fabrication, vec![g.id.clone(), tau.to_string()]));
            }
        }
    }
    None
}

/// No returned sequence holds a record twice.
pub fn duplicates(h: &CompletedHistory) -> Option<Violation> {
    for g in h.gets() {
        let mut seen = HashSet::new();
        for tau in g.returned().unwrap_or_default() {
            if !seen.insert(tau) {
                return Some(Violation::new(Property::Duplicate, vec![g.id.clone(), tau.to_string()]));
            }
        }
    }
    None
}

/// All returned sequences are pairwise prefix-related, which holds iff each
/// is a prefix of the longest one.
pub fn prefix_chain(h: &CompletedHistory) -> Option<Violation> {
    let longest = h.gets().max_by_key(|g| g.returned().map_or(0, <[_]>::len))?;
    let top = longest.returned().unwrap_or_default();
    for g in h.gets() {
        if !is_prefix(g.returned().unwrap_or_default(), top) {
            return Some(Violation::new(Property::PrefixChain, vec![g.id.clone(), longest.id.clone()]));
        }
    }
    None
}

/// A1 / S1: if `append(r1)` precedes `append(r2)`, every sequence holding
/// `r2` holds `r1` before it.
pub fn append_order(h: &CompletedHistory, scope: Scope) -> Option<Violation> {
    let appends: Vec<&Operation> = h.appends().collect();
    let positions: Vec<(&Operation, HashMap<RecordId, usize>)> = h
        .gets()
        .map(|g| {
            let pos = g.returned().unwrap_or_default().iter().enumerate().map(|(i, t)| (*t, i)).collect();
            (g, pos)
        })
        .collect();
    for a1 in &appends {
        let r1 = a1.record().expect("append").tau;
        for a2 in &appends {
            if !scope.ordered(a1, a2) {
                continue;
            }
            let r2 = a2.record().expect("append").tau;
            for (g, pos) in &positions {
                let Some(p2) = pos.get(&r2) else { continue };
                if !pos.get(&r1).is_some_and(|p1| p1 < p2) {
                    return Some(Violation::new(
                        scope.pick(Property::A1, Property::S1),
                        vec![a1.id.clone(), a2.id.clone(), g.id.clone()],
                    ));
                }
            }
        }
    }
    None
}

/// A4 / S2: a get that precedes `append(r)` does not return `r`.
pub fn no_future_record(h: &CompletedHistory, scope: Scope) -> Option<Violation> {
    for g in h.gets() {
        let returned: HashSet<&RecordId> = g.returned().unwrap_or_default().iter().collect();
        for a in h.appends() {
            if scope.ordered(g, a) && returned.contains(&a.record().expect("append").tau) {
                return Some(Violation::new(
                    scope.pick(Property::A4, Property::S2),
                    vec![g.id.clone(), a.id.clone()],
                ));
            }
        }
    }
    None
}

/// A2 / S3: a get that follows `append(r)` returns `r`.
pub fn append_visible(h: &CompletedHistory, scope: Scope) -> Option<Violation> {
    for g in h.gets() {
        let returned: HashSet<&RecordId> = g.returned().unwrap_or_default().iter().collect();
        for a in h.appends() {
            if scope.ordered(a, g) && !returned.contains(&a.record().expect("append").tau) {
                return Some(Violation::new(
                    scope.pick(Property::A2, Property::S3),
                    vec![a.id.clone(), g.id.clone()],
                ));
            }
        }
    }
    None
}

/// A3 / S4: of two ordered gets, the first result is a prefix of the second.
pub fn get_monotone(h: &CompletedHistory, scope: Scope) -> Option<Violation> {
    let gets: Vec<&Operation> = h.gets().collect();
    for g1 in &gets {
        for g2 in &gets {
            if scope.ordered(g1, g2) && !is_prefix(g1.returned().unwrap_or_default(), g2.returned().unwrap_or_default()) {
                return Some(Violation::new(
                    scope.pick(Property::A3, Property::S4),
                    vec![g1.id.clone(), g2.id.clone()],
                ));
            }
        }
    }
    None
}

/// Every completed append's record appears in every probe get, at one
/// position common to all of them.
pub fn probe_completeness(h: &CompletedHistory, probes: &BTreeSet<String>) -> Option<Violation> {
    let probe_gets: Vec<&Operation> = h.gets().filter(|g| probes.contains(&g.id)).collect();
    for a in h.appends().filter(|a| a.is_complete()) {
        let tau = a.record().expect("append").tau;
        let mut first: Option<(&Operation, usize)> = None;
        for p in &probe_gets {
            let Some(pos) = p.returned().unwrap_or_default().iter().position(|t| *t == tau) else {
                return Some(Violation::new(Property::ProbeCompleteness, vec![a.id.clone(), p.id.clone()]));
            };
            match first {
                None => first = Some((p, pos)),
                Some((q, qpos)) if qpos != pos => {
                    return Some(Violation::new(
                        Property::ProbeCompleteness,
                        vec![a.id.clone(), q.id.clone(), p.id.clone()],
                    ));
                }
                Some(_) => {}
            }
        }
    }
    None
}
