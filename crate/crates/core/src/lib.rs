//! Distributed ledger objects over atomic broadcast.
//!
//! - [`ledger`]: the sequential ledger, the validated ledger and validity
//!   predicates
//! - [`abcast`]: a sequencer-backed atomic broadcast service and a trace
//!   checker for its guarantees
//! - [`protocols`]: client and server state machines for eventual,
//!   sequential and atomic consistency, plus consensus from an eventual
//!   ledger
//! - [`sim`]: a deterministic discrete-event simulator producing run
//!   artifacts
//! - [`checkers`]: offline history checkers and brute-force oracles

pub mod abcast;
pub mod campaign;
pub mod checkers;
pub mod cli;
pub mod ledger;
pub mod protocols;
pub mod sim;
pub mod verdict;

pub use ledger::{AppendResult, Ledger, ProcessId, Record, RecordId, RecordSequence, ValidatedLedger, ValidityPredicate};
pub use protocols::Mode;
pub use sim::{run, RunArtifact, Scenario};
pub use verdict::{CheckerKind, Property, Status, Verdict};
