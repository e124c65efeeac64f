//! Consensus on top of an eventually consistent ledger: append the proposal,
//! then read the ledger until it is non-empty and decide its first record.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Completion, Mode};
use crate::ledger::ProcessId;
use crate::sim::{self, OpSpec, RandomCrashes, RunArtifact, Scenario, SimError, WorkloadSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Stage {
    Propose,
    Poll,
    Decided(String),
}

/// Client-side state machine of one proposer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposer {
    value: String,
    stage: Stage,
}

impl Proposer {
    pub fn new(value: impl Into<String>) -> Self {
        Self {
            value: value.into(),
            stage: Stage::Propose,
        }
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    /// The next ledger operation to issue, or `None` once decided.
    pub fn next_op(&self) -> Option<OpSpec> {
        match self.stage {
            Stage::Propose => Some(OpSpec::Append(self.value.clone())),
            Stage::Poll => Some(OpSpec::Get),
            Stage::Decided(_) => None,
        }
    }

    pub fn on_complete(&mut self, done: &Completion) {
        match (&self.stage, done) {
            (Stage::Propose, Completion::Append { .. }) => self.stage = Stage::Poll,
            (Stage::Poll, Completion::Get { seq, .. }) => {
                if let Some(first) = seq.first() {
                    self.stage = Stage::Decided(first.payload.clone());
                }
            }
            (stage, done) => panic!("completion {done:?} does not fit stage {stage:?}"),
        }
    }

    pub fn decision(&self) -> Option<&str> {
        match &self.stage {
            Stage::Decided(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("process {process} already decided {old:?}, cannot decide {new:?}")]
pub struct Redecision {
    pub process: ProcessId,
    pub old: String,
    pub new: String,
}

/// Proposals and (irreversible) decisions per process.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusState {
    pub proposals: BTreeMap<ProcessId, String>,
    pub decisions: BTreeMap<ProcessId, String>,
}

impl ConsensusState {
    pub fn propose(&mut self, process: ProcessId, value: impl Into<String>) {
        self.proposals.insert(process, value.into());
    }

    /// Records a decision. Deciding the same value again is a no-op; a
    /// different value is refused.
    pub fn decide(&mut self, process: ProcessId, value: impl Into<String>) -> Result<(), Redecision> {
        let value = value.into();
        match self.decisions.get(&process) {
            Some(old) if *old != value => Err(Redecision {
                process,
                old: old.clone(),
                new: value,
            }),
            Some(_) => Ok(()),
            None => {
                self.decisions.insert(process, value);
                Ok(())
            }
        }
    }

    /// All decided values are identical.
    pub fn agreement(&self) -> bool {
        self.decisions.values().collect::<BTreeSet<_>>().len() <= 1
    }

    /// Every decided value was proposed by some process.
    pub fn validity(&self) -> bool {
        let proposed: BTreeSet<_> = self.proposals.values().collect();
        self.decisions.values().all(|d| proposed.contains(d))
    }

    /// Every listed process has decided.
    pub fn all_decided<'a>(&self, mut correct: impl Iterator<Item = &'a ProcessId>) -> bool {
        correct.all(|p| self.decisions.contains_key(p))
    }
}

/// Parameters of one consensus run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusConfig {
    pub n: u32,
    pub f: u32,
    pub proposals: Vec<String>,
    pub seed: u64,
    pub max_delay: u64,
    /// Up to `f` server crashes are drawn in `[0, crash_window]`.
    pub crash_window: u64,
}

impl ConsensusConfig {
    /// `proposers` processes with distinct values `v0, v1, ...`.
    pub fn new(n: u32, f: u32, proposers: u32, seed: u64) -> Self {
        Self {
            n,
            f,
            proposals: (0..proposers).map(|i| format!("v{i}")).collect(),
            seed,
            max_delay: 10,
            crash_window: 30,
        }
    }

    pub fn scenario(&self) -> Scenario {
        let mut s = Scenario::new(Mode::Eventual, self.n, self.f, self.proposals.len() as u32, 0);
        s.workload = WorkloadSpec::Consensus {
            proposals: self.proposals.clone(),
        };
        s.seed = self.seed;
        s.max_delay = self.max_delay;
        s.probe_gets = 0;
        if self.f > 0 {
            s.random_crashes = Some(RandomCrashes {
                max: self.f,
                window: self.crash_window,
            });
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusOutcome {
    pub state: ConsensusState,
    pub artifact: RunArtifact,
}

impl ConsensusOutcome {
    pub fn agreement(&self) -> bool {
        self.state.agreement()
    }

    pub fn validity(&self) -> bool {
        self.state.validity()
    }

    /// Every proposer that did not crash decided.
    pub fn termination(&self) -> bool {
        let crashed: BTreeSet<_> = self.artifact.meta.client_crashes.iter().map(|c| c.client).collect();
        let correct: Vec<_> = self.state.proposals.keys().filter(|p| !crashed.contains(p)).collect();
        self.state.all_decided(correct.into_iter())
    }

    pub fn holds(&self) -> bool {
        self.agreement() && self.validity() && self.termination()
    }
}

/// Runs every proposal through the reduction on an eventual-mode ledger.
pub fn run_scenario(scenario: &Scenario) -> Result<ConsensusOutcome, SimError> {
    let WorkloadSpec::Consensus { proposals } = &scenario.workload else {
        return Err(sim::ConfigError::Workload("consensus needs a consensus workload".into()).into());
    };
    let artifact = sim::run(scenario)?;
    let mut state = ConsensusState::default();
    for (i, v) in proposals.iter().enumerate() {
        state.propose(i as ProcessId, v.clone());
    }
    for (p, v) in &artifact.meta.decisions {
        state
            .decide(*p, v.clone())
            .expect("each proposer decides once");
    }
    Ok(ConsensusOutcome { state, artifact })
}

pub fn run_consensus(cfg: &ConsensusConfig) -> Result<ConsensusOutcome, SimError> {
    run_scenario(&cfg.scenario())
}
