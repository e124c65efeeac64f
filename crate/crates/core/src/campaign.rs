//! Seeded batches of runs, each checked by a set of checkers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkers::check_artifact;
use crate::sim::{self, ConfigError, Scenario};
use crate::verdict::{CheckerKind, Property, Status};

#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub scenario: Scenario,
    pub start: u64,
    pub count: u64,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub checkers: Vec<CheckerKind>,
}

/// Outcome of one checker on one seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Divergence,
    Error,
}

impl From<Status> for Outcome {
    fn from(s: Status) -> Self {
        match s {
            Status::Pass => Self::Pass,
            Status::Fail => Self::Fail,
            Status::Divergence => Self::Divergence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub seed: u64,
    pub verdicts: BTreeMap<CheckerKind, Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub pass: u64,
    pub fail: u64,
    pub divergence: u64,
    pub error: u64,
}

impl Totals {
    pub fn total(&self) -> u64 {
        self.pass + self.fail + self.divergence + self.error
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub checker: CheckerKind,
    pub status: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated: Option<Property>,
    pub witness: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario_hash: String,
    pub rows: Vec<Row>,
    pub totals: BTreeMap<CheckerKind, Totals>,
    pub failures: Vec<Failure>,
    pub elapsed_ms: u64,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn count(&self, checker: CheckerKind, outcome: Outcome) -> u64 {
        let t = self.totals.get(&checker).copied().unwrap_or_default();
        match outcome {
            Outcome::Pass => t.pass,
            Outcome::Fail => t.fail,
            Outcome::Divergence => t.divergence,
            Outcome::Error => t.error,
        }
    }

    /// Fixed-width summary table followed by the failing seeds.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<11} {:>7} {:>7} {:>10} {:>7}", "checker", "pass", "fail", "divergence", "error");
        for (checker, t) in &self.totals {
            let _ = writeln!(
                out,
                "{:<11} {:>7} {:>7} {:>10} {:>7}",
                checker.name(),
                t.pass,
                t.fail,
                t.divergence,
                t.error
            );
        }
        for f in &self.failures {
            let what = f.violated.map(|p| p.to_string()).unwrap_or_default();
            let detail = f.message.clone().unwrap_or_else(|| f.witness.join(" "));
            let _ = writeln!(out, "seed {} {} {:?} {} {}", f.seed, f.checker, f.status, what, detail);
        }
        let _ = writeln!(out, "{} runs in {} ms", self.rows.len(), self.elapsed_ms);
        out
    }
}

fn run_seed(scenario: &Scenario, seed: u64, checkers: &[CheckerKind]) -> (Row, Vec<Failure>) {
    let mut row = Row {
        seed,
        verdicts: BTreeMap::new(),
        error: None,
    };
    let mut failures = Vec::new();
    let artifact = match sim::run(&scenario.clone().with_seed(seed)) {
        Ok(a) => a,
        Err(e) => {
            log::info!("seed {seed}: run failed: {e}");
            for &c in checkers {
                row.verdicts.insert(c, Outcome::Error);
                failures.push(Failure {
                    seed,
                    checker: c,
                    status: Outcome::Error,
                    violated: None,
                    witness: Vec::new(),
                    message: Some(e.to_string()),
                });
            }
            row.error = Some(e.to_string());
            return (row, failures);
        }
    };
    for &c in checkers {
        match check_artifact(&artifact, c) {
            Ok(v) => {
                let outcome = Outcome::from(v.status);
                if outcome != Outcome::Pass {
                    failures.push(Failure {
                        seed,
                        checker: c,
                        status: outcome.clone(),
                        violated: v.violated,
                        witness: v.witness,
                        message: None,
                    });
                }
                row.verdicts.insert(c, outcome);
            }
            Err(e) => {
                row.verdicts.insert(c, Outcome::Error);
                failures.push(Failure {
                    seed,
                    checker: c,
                    status: Outcome::Error,
                    violated: None,
                    witness: Vec::new(),
                    message: Some(e.to_string()),
                });
            }
        }
    }
    (row, failures)
}

/// Runs seeds `start..start + count` and checks each artifact. A run that
/// fails is recorded as an error for every checker; the campaign goes on.
pub fn run_campaign(spec: &CampaignSpec) -> Result<Report, ConfigError> {
    if spec.count == 0 {
        return Err(ConfigError::Workload("campaign needs at least one seed".into()));
    }
    spec.scenario.validate()?;
    let started = Instant::now();
    let seeds: Vec<u64> = (0..spec.count).map(|i| spec.start.wrapping_add(i)).collect();
    let work = || -> Vec<(Row, Vec<Failure>)> {
        seeds
            .par_iter()
            .map(|&seed| run_seed(&spec.scenario, seed, &spec.checkers))
            .collect()
    };
    let results = match spec.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    };
    let mut totals: BTreeMap<CheckerKind, Totals> = spec.checkers.iter().map(|c| (*c, Totals::default())).collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (row, fails) in results {
        for (c, o) in &row.verdicts {
            let t = totals.entry(*c).or_default();
            match o {
                Outcome::Pass => t.pass += 1,
                Outcome::Fail => t.fail += 1,
                Outcome::Divergence => t.divergence += 1,
                Outcome::Error => t.error += 1,
            }
        }
        rows.push(row);
        failures.extend(fails);
    }
    Ok(Report {
        scenario_hash: spec.scenario.hash(),
        rows,
        totals,
        failures,
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::Mode;

    #[test]
    fn single_seed_gives_one_row() {
        let spec = CampaignSpec {
            scenario: Scenario::new(Mode::Atomic, 3, 1, 2, 4),
            start: 5,
            count: 1,
            jobs: Some(1),
            checkers: vec![CheckerKind::Atomic, CheckerKind::Abcast],
        };
        let r = run_campaign(&spec).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].seed, 5);
        assert!(r.all_pass());
        assert_eq!(r.totals[&CheckerKind::Atomic].total(), 1);
        assert!(r.to_table().contains("atomic"));
    }

    #[test]
    fn zero_seeds_is_a_config_error() {
        let spec = CampaignSpec {
            scenario: Scenario::new(Mode::Atomic, 3, 1, 2, 4),
            start: 0,
            count: 0,
            jobs: None,
            checkers: vec![CheckerKind::Atomic],
        };
        assert!(run_campaign(&spec).is_err());
    }

    #[test]
    fn totals_sum_to_the_seed_count() {
        let spec = CampaignSpec {
            scenario: Scenario::new(Mode::Eventual, 3, 1, 3, 6),
            start: 0,
            count: 20,
            jobs: Some(2),
            checkers: vec![CheckerKind::Atomic, CheckerKind::Eventual],
        };
        let r = run_campaign(&spec).unwrap();
        for t in r.totals.values() {
            assert_eq!(t.total(), 20);
        }
        assert_eq!(r.count(CheckerKind::Eventual, Outcome::Pass), 20);
    }
}
