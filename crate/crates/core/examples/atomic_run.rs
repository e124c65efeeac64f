//! Simulate an atomic-mode run with a server crash, save the artifact and
//! check it.

use ledgerlab::checkers::check_artifact;
use ledgerlab::sim::{run, CrashSpec};
use ledgerlab::{CheckerKind, Mode, Scenario};

fn main() {
    let mut s = Scenario::new(Mode::Atomic, 3, 1, 4, 10).with_seed(42);
    s.crash_schedule = vec![CrashSpec { server: 1, time: 15 }];
    let artifact = run(&s).expect("valid scenario");
    let sum = artifact.summary();
    println!(
        "{} ops completed, {} pending, {} records, {} crash",
        sum.ops_completed, sum.ops_pending, sum.records_appended, sum.crashes
    );
    for ev in artifact.history.events.iter().take(6) {
        println!("  {}", serde_json::to_string(ev).unwrap());
    }
    for kind in [CheckerKind::Atomic, CheckerKind::Sequential, CheckerKind::Eventual, CheckerKind::Abcast] {
        println!("{}", check_artifact(&artifact, kind).unwrap());
    }
    let dir = std::env::temp_dir().join("ledgerlab-atomic-run");
    artifact.write_dir(&dir).unwrap();
    println!("artifact written to {}", dir.display());
}
