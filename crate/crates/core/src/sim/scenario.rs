//! Declarative run descriptions and their validation.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::abcast::ServerId;
use crate::ledger::{ProcessId, Transfer, ValidityPredicate};
use crate::protocols::Mode;

// Independent RNG streams derived from the scenario seed.
const WORKLOAD_STREAM: u64 = 0x776f_726b_6c6f_6164;
const CRASH_STREAM: u64 = 0x6372_6173_6865_7321;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("scenario needs at least one server")]
    NoServers,
    #[error("crash bound f={f} must be smaller than the number of servers n={n}")]
    FaultBound { n: u32, f: u32 },
    #[error("atomic broadcast requires a majority of servers not to crash: need f < n/2, got f={f}, n={n}")]
    MajorityRequired { n: u32, f: u32 },
    #[error("crash schedule names {requested} server crashes but at most f={f} are allowed")]
    TooManyCrashes { requested: u32, f: u32 },
    #[error("server {server} appears more than once in the crash schedule")]
    DuplicateCrash { server: ServerId },
    #[error("server {server} does not exist (n={n})")]
    UnknownServer { server: ServerId, n: u32 },
    #[error("client {client} does not exist ({clients} clients)")]
    UnknownClient { client: ProcessId, clients: u32 },
    #[error("crash time {time} lies beyond the run horizon {horizon}")]
    BeyondHorizon { time: u64, horizon: u64 },
    #[error("max_delay must be at least 1")]
    ZeroDelay,
    #[error("malformed workload: {0}")]
    Workload(String),
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
}

/// One client operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpSpec {
    Get,
    Append(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayloadSpec {
    /// `v<client>.<index>`
    Counter,
    /// Random `deposit:`/`withdraw:` transfers over the given accounts.
    Accounts {
        accounts: Vec<String>,
        max_amount: u64,
        #[serde(default = "half")]
        deposit_ratio: f64,
    },
}

impl Default for PayloadSpec {
    fn default() -> Self {
        Self::Counter
    }
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub ops_per_client: u32,
    #[serde(default = "half")]
    pub append_ratio: f64,
    #[serde(default)]
    pub payloads: PayloadSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadSpec {
    /// One explicit operation list per client.
    Explicit(Vec<Vec<OpSpec>>),
    Generate(GeneratorSpec),
    /// Every client runs the consensus reduction with its proposal.
    Consensus { proposals: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashSpec {
    pub server: ServerId,
    pub time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientCrashSpec {
    pub client: ProcessId,
    pub time: u64,
}

/// Draw between 0 and `max` additional server crashes, at times in
/// `[0, window]`, from the scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCrashes {
    pub max: u32,
    pub window: u64,
}

fn default_max_delay() -> u64 {
    10
}

fn default_max_think() -> u64 {
    5
}

fn default_probe_gets() -> u32 {
    2
}

fn default_horizon() -> u64 {
    100_000
}

/// A complete, reproducible description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: u32,
    pub f: u32,
    pub clients: u32,
    pub mode: Mode,
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub crash_schedule: Vec<CrashSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_crashes: Option<RandomCrashes>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub client_crashes: Vec<ClientCrashSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Upper bound on channel and broadcast delays, in ticks.
    #[serde(default = "default_max_delay")]
    pub max_delay: u64,
    /// Upper bound on the pause between a response and the next invocation.
    #[serde(default = "default_max_think")]
    pub max_think: u64,
    /// Enables the validated view (filtered gets) at the client boundary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate: Option<ValidityPredicate>,
    /// Failure-free gets per surviving client after quiescence.
    #[serde(default = "default_probe_gets")]
    pub probe_gets: u32,
    /// Latest tick at which a crash may be scheduled.
    #[serde(default = "default_horizon")]
    pub horizon: u64,
}

/// What a client executes during the workload phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientProgram {
    Ops(Vec<OpSpec>),
    Propose(String),
}

/// A scenario with its seed-dependent parts drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub crashes: Vec<CrashSpec>,
    pub programs: Vec<ClientProgram>,
}

impl Scenario {
    /// A scenario with no crashes and a generated workload.
    pub fn new(mode: Mode, n: u32, f: u32, clients: u32, ops_per_client: u32) -> Self {
        Self {
            n,
            f,
            clients,
            mode,
            workload: WorkloadSpec::Generate(GeneratorSpec {
                ops_per_client,
                append_ratio: 0.5,
                payloads: PayloadSpec::Counter,
            }),
            crash_schedule: Vec::new(),
            random_crashes: None,
            client_crashes: Vec::new(),
            seed: 0,
            max_delay: default_max_delay(),
            max_think: default_max_think(),
            predicate: None,
            probe_gets: default_probe_gets(),
            horizon: default_horizon(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (n, f) = (self.n, self.f);
        if n == 0 {
            return Err(ConfigError::NoServers);
        }
        if f >= n {
            return Err(ConfigError::FaultBound { n, f });
        }
        // every mode orders requests through the atomic broadcast
        if 2 * f >= n {
            return Err(ConfigError::MajorityRequired { n, f });
        }
        if self.max_delay == 0 {
            return Err(ConfigError::ZeroDelay);
        }
        let random_max = self.random_crashes.map_or(0, |r| r.max);
        let requested = self.crash_schedule.len() as u32 + random_max;
        if requested > f {
            return Err(ConfigError::TooManyCrashes { requested, f });
        }
        let mut seen = BTreeSet::new();
        for c in &self.crash_schedule {
            if c.server >= n {
                return Err(ConfigError::UnknownServer { server: c.server, n });
            }
            if !seen.insert(c.server) {
                return Err(ConfigError::DuplicateCrash { server: c.server });
            }
            if c.time > self.horizon {
                return Err(ConfigError::BeyondHorizon {
                    time: c.time,
                    horizon: self.horizon,
                });
            }
        }
        if let Some(r) = self.random_crashes {
            if r.window > self.horizon {
                return Err(ConfigError::BeyondHorizon {
                    time: r.window,
                    horizon: self.horizon,
                });
            }
        }
        for c in &self.client_crashes {
            if c.client >= self.clients {
                return Err(ConfigError::UnknownClient {
                    client: c.client,
                    clients: self.clients,
                });
            }
            if c.time > self.horizon {
                return Err(ConfigError::BeyondHorizon {
                    time: c.time,
                    horizon: self.horizon,
                });
            }
        }
        match &self.workload {
            WorkloadSpec::Explicit(lists) if lists.len() != self.clients as usize => {
                Err(ConfigError::Workload(format!(
                    "{} operation lists for {} clients",
                    lists.len(),
                    self.clients
                )))
            }
            WorkloadSpec::Consensus { proposals } if proposals.len() != self.clients as usize => {
                Err(ConfigError::Workload(format!(
                    "{} proposals for {} clients",
                    proposals.len(),
                    self.clients
                )))
            }
            WorkloadSpec::Generate(g) => g.validate(),
            _ => Ok(()),
        }
    }

    /// Validates and draws the seed-dependent parts (workload, random
    /// crashes).
    pub fn resolve(&self) -> Result<ResolvedScenario, ConfigError> {
        self.validate()?;
        let programs = match &self.workload {
            WorkloadSpec::Explicit(lists) => lists.iter().cloned().map(ClientProgram::Ops).collect(),
            WorkloadSpec::Generate(g) => generate_workload(g, self.clients, self.seed)?
                .into_iter()
                .map(ClientProgram::Ops)
                .collect(),
            WorkloadSpec::Consensus { proposals } => {
                proposals.iter().cloned().map(ClientProgram::Propose).collect()
            }
        };
        let mut crashes = self.crash_schedule.clone();
        if let Some(r) = self.random_crashes {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ CRASH_STREAM);
            let count = rng.gen_range(0..=r.max);
            let taken: BTreeSet<_> = crashes.iter().map(|c| c.server).collect();
            let mut candidates: Vec<ServerId> = (0..self.n).filter(|s| !taken.contains(s)).collect();
            candidates.shuffle(&mut rng);
            for server in candidates.into_iter().take(count as usize) {
                crashes.push(CrashSpec {
                    server,
                    time: rng.gen_range(0..=r.window),
                });
            }
        }
        crashes.sort_by_key(|c| (c.time, c.server));
        Ok(ResolvedScenario {
            scenario: self.clone(),
            crashes,
            programs,
        })
    }
}

impl GeneratorSpec {
    fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.append_ratio) {
            return Err(ConfigError::Workload(format!(
                "append_ratio {} outside [0, 1]",
                self.append_ratio
            )));
        }
        if let PayloadSpec::Accounts {
            accounts,
            max_amount,
            deposit_ratio,
        } = &self.payloads
        {
            if accounts.is_empty() || accounts.iter().any(|a| a.is_empty() || a.contains(':')) {
                return Err(ConfigError::Workload("account names must be non-empty and free of ':'".into()));
            }
            if *max_amount == 0 {
                return Err(ConfigError::Workload("max_amount must be positive".into()));
            }
            if !(0.0..=1.0).contains(deposit_ratio) {
                return Err(ConfigError::Workload(format!("deposit_ratio {deposit_ratio} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Expands a generator spec into explicit per-client operation lists.
pub fn generate_workload(
    spec: &GeneratorSpec,
    clients: u32,
    seed: u64,
) -> Result<Vec<Vec<OpSpec>>, ConfigError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ WORKLOAD_STREAM);
    let mut out = Vec::with_capacity(clients as usize);
    for client in 0..clients {
        let mut ops = Vec::with_capacity(spec.ops_per_client as usize);
        for i in 0..spec.ops_per_client {
            if rng.gen_bool(spec.append_ratio) {
                let payload = match &spec.payloads {
                    PayloadSpec::Counter => format!("v{client}.{i}"),
                    PayloadSpec::Accounts {
                        accounts,
                        max_amount,
                        deposit_ratio,
                    } => {
                        let account = accounts.choose(&mut rng).expect("validated non-empty").clone();
                        let amount = rng.gen_range(1..=*max_amount);
                        if rng.gen_bool(*deposit_ratio) {
                            Transfer::Deposit { account, amount }.payload()
                        } else {
                            Transfer::Withdraw { account, amount }.payload()
                        }
                    }
                };
                ops.push(OpSpec::Append(payload));
            } else {
                ops.push(OpSpec::Get);
            }
        }
        out.push(ops);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(ops: u32, ratio: f64) -> GeneratorSpec {
        GeneratorSpec {
            ops_per_client: ops,
            append_ratio: ratio,
            payloads: PayloadSpec::Counter,
        }
    }

    #[test]
    fn all_appends_at_ratio_one() {
        let w = generate_workload(&gen(3, 1.0), 2, 9).unwrap();
        assert_eq!(w.len(), 2);
        for ops in &w {
            assert_eq!(ops.len(), 3);
            assert!(ops.iter().all(|o| matches!(o, OpSpec::Append(_))));
        }
        assert_eq!(w[1][2], OpSpec::Append("v1.2".into()));
    }

    #[test]
    fn workload_is_a_function_of_the_seed() {
        let spec = gen(20, 0.5);
        assert_eq!(generate_workload(&spec, 4, 5).unwrap(), generate_workload(&spec, 4, 5).unwrap());
        assert_ne!(generate_workload(&spec, 4, 5).unwrap(), generate_workload(&spec, 4, 6).unwrap());
    }

    #[test]
    fn zero_ops_is_an_empty_workload() {
        let w = generate_workload(&gen(0, 0.5), 3, 1).unwrap();
        assert!(w.iter().all(Vec::is_empty));
    }

    #[test]
    fn account_payloads_parse() {
        let spec = GeneratorSpec {
            ops_per_client: 30,
            append_ratio: 1.0,
            payloads: PayloadSpec::Accounts {
                accounts: vec!["A".into(), "B".into()],
                max_amount: 9,
                deposit_ratio: 0.5,
            },
        };
        for ops in generate_workload(&spec, 2, 3).unwrap() {
            for op in ops {
                let OpSpec::Append(p) = op else { panic!() };
                assert!(Transfer::parse(&p).is_some(), "{p}");
            }
        }
    }

    #[test]
    fn majority_is_enforced() {
        let s = Scenario::new(Mode::Atomic, 3, 2, 1, 1);
        let err = s.validate().unwrap_err();
        assert!(matches!(err, ConfigError::MajorityRequired { .. }));
        assert!(err.to_string().contains("majority"));
        assert!(matches!(
            Scenario::new(Mode::Eventual, 2, 2, 1, 1).validate(),
            Err(ConfigError::FaultBound { .. })
        ));
        assert!(Scenario::new(Mode::Eventual, 5, 2, 1, 1).validate().is_ok());
    }

    #[test]
    fn crash_schedule_is_bounded_by_f() {
        let mut s = Scenario::new(Mode::Atomic, 3, 1, 1, 1);
        s.crash_schedule = vec![CrashSpec { server: 0, time: 1 }, CrashSpec { server: 1, time: 2 }];
        assert!(matches!(s.validate(), Err(ConfigError::TooManyCrashes { requested: 2, f: 1 })));
        s.crash_schedule.pop();
        assert!(s.validate().is_ok());
        s.random_crashes = Some(RandomCrashes { max: 1, window: 10 });
        assert!(matches!(s.validate(), Err(ConfigError::TooManyCrashes { .. })));
    }

    #[test]
    fn crash_targets_are_checked() {
        let mut s = Scenario::new(Mode::Atomic, 5, 2, 1, 1);
        s.crash_schedule = vec![CrashSpec { server: 7, time: 1 }];
        assert!(matches!(s.validate(), Err(ConfigError::UnknownServer { .. })));
        s.crash_schedule = vec![CrashSpec { server: 1, time: 1 }, CrashSpec { server: 1, time: 4 }];
        assert!(matches!(s.validate(), Err(ConfigError::DuplicateCrash { server: 1 })));
        s.crash_schedule = vec![CrashSpec { server: 1, time: s.horizon + 1 }];
        assert!(matches!(s.validate(), Err(ConfigError::BeyondHorizon { .. })));
        s.crash_schedule.clear();
        s.client_crashes = vec![ClientCrashSpec { client: 1, time: 0 }];
        assert!(matches!(s.validate(), Err(ConfigError::UnknownClient { .. })));
    }

    #[test]
    fn random_crashes_respect_the_bound() {
        let mut s = Scenario::new(Mode::Atomic, 5, 2, 1, 1);
        s.random_crashes = Some(RandomCrashes { max: 2, window: 50 });
        let mut seen_counts = BTreeSet::new();
        for seed in 0..200 {
            let r = s.clone().with_seed(seed).resolve().unwrap();
            assert!(r.crashes.len() <= 2);
            let servers: BTreeSet<_> = r.crashes.iter().map(|c| c.server).collect();
            assert_eq!(servers.len(), r.crashes.len());
            assert!(r.crashes.iter().all(|c| c.time <= 50));
            seen_counts.insert(r.crashes.len());
        }
        assert_eq!(seen_counts.len(), 3);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"n":3,"f":1,"clients":1,"mode":"atomic","workload":{"explicit":[["get"]]},"bogus":1}"#;
        assert!(matches!(Scenario::from_json(text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{"n":3,"f":1,"clients":2,"mode":"sequential",
            "workload":{"explicit":[[{"append":"x"},"get"],[]]},
            "crash_schedule":[{"server":2,"time":4}]}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.max_delay, 10);
        assert_eq!(s.probe_gets, 2);
        assert_eq!(s.mode, Mode::Sequential);
        let again = Scenario::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.hash(), s.hash());
        assert_ne!(s.clone().with_seed(1).hash(), s.hash());
    }

    #[test]
    fn explicit_workload_must_cover_every_client() {
        let text = r#"{"n":3,"f":1,"clients":2,"mode":"atomic","workload":{"explicit":[["get"]]}}"#;
        assert!(matches!(Scenario::from_json(text), Err(ConfigError::Workload(_))));
    }
}
