//! Find an eventual-mode run where a get misses an append that completed
//! before it, although the run is eventually consistent.

use ledgerlab::checkers::check_artifact;
use ledgerlab::sim::run;
use ledgerlab::{CheckerKind, Mode, Property, Scenario};

fn main() {
    for seed in 0..1000 {
        let s = Scenario::new(Mode::Eventual, 3, 1, 4, 20).with_seed(seed);
        let a = run(&s).unwrap();
        let atomic = check_artifact(&a, CheckerKind::Atomic).unwrap();
        let eventual = check_artifact(&a, CheckerKind::Eventual).unwrap();
        if atomic.fails_at(Property::A2) && eventual.is_pass() {
            println!("seed {seed}");
            println!("  {atomic}");
            println!("  {eventual}");
            for id in &atomic.witness {
                for ev in a.history.events.iter().filter(|e| &e.op == id) {
                    println!("  {}", serde_json::to_string(ev).unwrap());
                }
            }
            return;
        }
    }
    println!("no stale read in 1000 seeds");
}
