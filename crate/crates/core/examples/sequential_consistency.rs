//! Sequential mode is sequentially consistent but not linearizable: look for
//! a client whose get misses another client's completed append.

use ledgerlab::checkers::{check_artifact, complete_history, PartialHistory};
use ledgerlab::sim::run;
use ledgerlab::{CheckerKind, Mode, Scenario};

fn main() {
    let mut seen = (0, 0);
    for seed in 0..500 {
        let a = run(&Scenario::new(Mode::Sequential, 3, 1, 4, 20).with_seed(seed)).unwrap();
        let sequential = check_artifact(&a, CheckerKind::Sequential).unwrap();
        let atomic = check_artifact(&a, CheckerKind::Atomic).unwrap();
        assert!(sequential.is_pass());
        seen.0 += 1;
        if atomic.is_fail() {
            seen.1 += 1;
            if seen.1 == 1 {
                let h = complete_history(&PartialHistory::from_history(&a.history).unwrap()).unwrap().remove(0);
                println!("seed {seed}: {atomic}");
                for id in &atomic.witness {
                    if let Some(op) = h.op(id) {
                        println!("  {id} by client {} in [{}, {:?}]", op.client, op.invoke_t, op.response_t);
                    }
                }
            }
        }
    }
    println!("{} runs sequentially consistent, {} of them not atomic", seen.0, seen.1);
}
