//! Consensus from an eventually consistent ledger: propose by appending,
//! decide the first record once a get returns something.

use ledgerlab::protocols::consensus::{run_consensus, ConsensusConfig};

fn main() {
    let mut all = 0;
    for seed in 0..200 {
        let cfg = ConsensusConfig::new(5, 2, 4, seed);
        let out = run_consensus(&cfg).expect("runs");
        assert!(out.holds(), "seed {seed}");
        all += 1;
        if seed < 3 {
            let crashes: Vec<_> = out.artifact.meta.crashes.iter().map(|c| (c.server, c.time)).collect();
            println!("seed {seed}: crashes {crashes:?}");
            for (p, v) in &out.state.proposals {
                println!("  p{p} proposed {v}, decided {:?}", out.state.decisions.get(p));
            }
        }
    }
    println!("{all} runs: agreement, validity and termination hold");
}
