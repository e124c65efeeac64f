//! A replicated validated ledger: servers keep every record and clients
//! filter what they read.

use ledgerlab::checkers::check_artifact;
use ledgerlab::sim::run;
use ledgerlab::{CheckerKind, Scenario};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/validated.json");
    let s = Scenario::load(path.as_ref()).unwrap();
    let a = run(&s).unwrap();
    for g in a.validated_gets.iter().rev().take(3) {
        let raw = a.history.events.iter().find(|e| e.op == g.op && e.seq.is_some()).unwrap();
        println!("{}: raw {} records, valid {}", g.op, raw.seq.as_ref().unwrap().len(), g.seq.len());
    }
    println!("{}", check_artifact(&a, CheckerKind::Vspec).unwrap());
}
