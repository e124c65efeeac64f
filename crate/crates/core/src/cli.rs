//! Command-line front end behind the `ledgerlab` binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::campaign::{run_campaign, CampaignSpec, Outcome};
use crate::checkers::check_artifact;
use crate::protocols::consensus::{run_scenario, ConsensusConfig};
use crate::sim::{self, ConfigError, RunArtifact, Scenario, SimError};
use crate::verdict::{CheckerKind, Status, Verdict};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_FAIL: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "ledgerlab", version, about = "Simulate and check distributed ledger runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute a scenario and write its artifact directory.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check an artifact directory and write verdict.json into it.
    Check {
        /// Artifact directory produced by `run`.
        dir: PathBuf,
        #[arg(long)]
        checker: CheckerKind,
    },
    /// Run a range of seeds and check every run.
    Campaign {
        #[arg(long)]
        scenario: PathBuf,
        /// `<start>:<count>`
        #[arg(long, value_parser = parse_seeds)]
        seeds: (u64, u64),
        #[arg(long)]
        jobs: Option<usize>,
        /// Repeatable; defaults to the checker matching the scenario mode
        /// plus abcast.
        #[arg(long)]
        checker: Vec<CheckerKind>,
        /// Directory for report.json and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run consensus on top of an eventually consistent ledger.
    Consensus {
        #[arg(long, default_value_t = 3)]
        n: u32,
        #[arg(long, default_value_t = 1)]
        f: u32,
        #[arg(long, default_value_t = 3)]
        proposers: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated proposals (defaults to v0, v1, ...).
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, default_value_t = 10)]
        max_delay: u64,
    },
}

fn parse_seeds(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(':').ok_or("expected <start>:<count>")?;
    let start = a.parse().map_err(|e| format!("bad start: {e}"))?;
    let count: u64 = b.parse().map_err(|e| format!("bad count: {e}"))?;
    if count == 0 {
        return Err("count must be at least 1".into());
    }
    Ok((start, count))
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn sim_exit(e: &SimError) -> u8 {
    match e {
        SimError::Config(_) => EXIT_CONFIG,
        SimError::Stalled { .. } | SimError::EventLimit(_) => EXIT_INTERNAL,
    }
}

fn verdict_exit(v: &Verdict) -> u8 {
    match v.status {
        Status::Pass => EXIT_PASS,
        Status::Fail => EXIT_FAIL,
        Status::Divergence => EXIT_DIVERGENCE,
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, ConfigError> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn cmd_run(scenario: &Path, seed: Option<u64>, out: &Path) -> ExitCode {
    let s = match load(scenario, seed) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let artifact = match sim::run(&s) {
        Ok(a) => a,
        Err(e) => return fail(sim_exit(&e), e),
    };
    if let Err(e) = artifact.write_dir(out) {
        return fail(EXIT_INTERNAL, e);
    }
    let sum = artifact.summary();
    println!(
        "{} mode, seed {}: {} ops completed, {} pending, {} records appended, {} crashes injected -> {}",
        s.mode,
        s.seed,
        sum.ops_completed,
        sum.ops_pending,
        sum.records_appended,
        sum.crashes,
        out.display()
    );
    ExitCode::from(EXIT_PASS)
}

fn cmd_check(dir: &Path, checker: CheckerKind) -> ExitCode {
    let artifact = match RunArtifact::read_dir(dir) {
        Ok(a) => a,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let verdict = match check_artifact(&artifact, checker) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let path = dir.join("verdict.json");
    let mut text = serde_json::to_string_pretty(&verdict).expect("verdict serializes");
    text.push('\n');
    if let Err(e) = std::fs::write(&path, text) {
        return fail(EXIT_INTERNAL, format!("{}: {e}", path.display()));
    }
    println!("{verdict}");
    ExitCode::from(verdict_exit(&verdict))
}

fn cmd_campaign(
    scenario: &Path,
    (start, count): (u64, u64),
    jobs: Option<usize>,
    mut checkers: Vec<CheckerKind>,
    out: Option<&Path>,
) -> ExitCode {
    let s = match load(scenario, None) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if checkers.is_empty() {
        checkers = vec![
            match s.mode {
                crate::Mode::Atomic => CheckerKind::Atomic,
                crate::Mode::Sequential => CheckerKind::Sequential,
                crate::Mode::Eventual => CheckerKind::Eventual,
            },
            CheckerKind::Abcast,
        ];
    }
    let spec = CampaignSpec {
        scenario: s,
        start,
        count,
        jobs,
        checkers,
    };
    let report = match run_campaign(&spec) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let table = report.to_table();
    print!("{table}");
    if let Some(dir) = out {
        let written = std::fs::create_dir_all(dir)
            .and_then(|_| {
                let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
                json.push('\n');
                std::fs::write(dir.join("report.json"), json)
            })
            .and_then(|_| std::fs::write(dir.join("report.txt"), &table));
        if let Err(e) = written {
            return fail(EXIT_INTERNAL, format!("{}: {e}", dir.display()));
        }
    }
    let seen = |o: Outcome| report.failures.iter().any(|f| f.status == o);
    let code = if seen(Outcome::Fail) {
        EXIT_FAIL
    } else if seen(Outcome::Divergence) {
        EXIT_DIVERGENCE
    } else if seen(Outcome::Error) {
        EXIT_INTERNAL
    } else {
        EXIT_PASS
    };
    ExitCode::from(code)
}

fn cmd_consensus(n: u32, f: u32, proposers: u32, seed: u64, values: Vec<String>, max_delay: u64) -> ExitCode {
    let mut cfg = ConsensusConfig::new(n, f, proposers, seed);
    if !values.is_empty() {
        if values.len() != proposers as usize {
            return fail(
                EXIT_CONFIG,
                format!("{} values given for {proposers} proposers", values.len()),
            );
        }
        cfg.proposals = values;
    }
    cfg.max_delay = max_delay;
    let out = match run_scenario(&cfg.scenario()) {
        Ok(o) => o,
        Err(e) => return fail(sim_exit(&e), e),
    };
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let _ = writeln!(w, "{:<8} {:<12} {:<12}", "process", "proposal", "decision");
    for (p, v) in &out.state.proposals {
        let d = out.state.decisions.get(p).map_or("-", String::as_str);
        let _ = writeln!(w, "{:<8} {:<12} {:<12}", p, v, d);
    }
    let _ = writeln!(
        w,
        "agreement={} validity={} termination={} crashes={:?}",
        out.agreement(),
        out.validity(),
        out.termination(),
        out.artifact.meta.crashes.iter().map(|c| (c.server, c.time)).collect::<Vec<_>>()
    );
    if out.holds() {
        ExitCode::from(EXIT_PASS)
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("LEDGERLAB_LOG", "off");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { scenario, seed, out } => cmd_run(&scenario, seed, &out),
        Command::Check { dir, checker } => cmd_check(&dir, checker),
        Command::Campaign {
            scenario,
            seeds,
            jobs,
            checker,
            out,
        } => cmd_campaign(&scenario, seeds, jobs, checker, out.as_deref()),
        Command::Consensus {
            n,
            f,
            proposers,
            seed,
            values,
            max_delay,
        } => cmd_consensus(n, f, proposers, seed, values, max_delay),
    }
}
