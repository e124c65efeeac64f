//! Offline verification of run artifacts and histories.
//!
//! The property checks ([`properties`]) are necessary conditions that scale
//! to long histories; [`oracle`] searches permutations exhaustively and is
//! the reference on small ones. When both run and disagree the verdict is
//! [`Status::Divergence`](crate::verdict::Status::Divergence).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::abcast::check_abcast_trace;
use crate::sim::{HistoryError, RunArtifact};
use crate::verdict::{CheckerKind, Verdict};

pub mod consistency;
pub mod history;
pub mod oracle;
pub mod properties;
pub mod spec;

pub use consistency::{
    atomic_violation, check_atomic, check_eventual, check_partial, check_sequential_consistency, eventual_order,
    eventual_violation, sequential_violation, validated_violation, Check, OracleMode, ORACLE_AUTO_LIMIT,
};
pub use history::{complete_history, CompletedHistory, OpBody, Operation, PartialHistory, MAX_PENDING_APPENDS};
pub use oracle::{brute_force_oracle, CapacityError, Linearization, OrderConstraint, ORACLE_LIMIT};
pub use properties::{Scope, Violation};
pub use spec::{check_sequential_spec, check_validated_spec};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("malformed history: {0}")]
    History(#[from] HistoryError),
    #[error("{pending} pending appends exceed the completion limit of {limit}; rerun with a smaller workload")]
    TooManyPending { pending: usize, limit: usize },
    #[error("history has {ops} operations, the oracle handles at most {limit}")]
    Capacity { ops: usize, limit: usize },
    #[error("no probe gets recorded; the eventual check needs at least one")]
    NoProbes,
    #[error("run has no validity predicate")]
    NoPredicate,
    #[error("no validated view recorded for {0}")]
    MissingView(String),
}

/// Gets invoked at or after the start of the probe phase.
pub fn probe_ops(a: &RunArtifact) -> BTreeSet<String> {
    a.history
        .events
        .iter()
        .skip(a.meta.probe_start)
        .filter(|e| e.ev == crate::sim::EventType::Invoke && e.kind == crate::sim::OpKind::Get)
        .map(|e| e.op.clone())
        .collect()
}

/// Runs one checker on an artifact. The atomic and sequential checkers
/// consult the oracle on histories of at most [`ORACLE_AUTO_LIMIT`]
/// operations.
pub fn check_artifact(a: &RunArtifact, kind: CheckerKind) -> Result<Verdict, CheckError> {
    if kind == CheckerKind::Abcast {
        return Ok(check_abcast_trace(&a.abtrace));
    }
    let h = PartialHistory::from_history(&a.history)?;
    match kind {
        CheckerKind::Atomic => check_partial(&h, Check::Atomic(OracleMode::Auto)),
        CheckerKind::Sequential => check_partial(&h, Check::Sequential(OracleMode::Auto)),
        CheckerKind::Eventual => {
            let probes = probe_ops(a);
            check_partial(&h, Check::Eventual { probes: &probes })
        }
        CheckerKind::Vspec => {
            let predicate = a.meta.scenario.predicate.as_ref().ok_or(CheckError::NoPredicate)?;
            let views: BTreeMap<_, _> = a.validated_gets.iter().map(|g| (g.op.clone(), g.seq.clone())).collect();
            check_partial(&h, Check::Validated { predicate, views: &views })
        }
        CheckerKind::Abcast => unreachable!(),
    }
}
