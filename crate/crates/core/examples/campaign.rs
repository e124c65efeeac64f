//! A seed campaign over the bundled sequential scenario.

use ledgerlab::campaign::{run_campaign, CampaignSpec};
use ledgerlab::{CheckerKind, Scenario};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/sequential.json");
    let spec = CampaignSpec {
        scenario: Scenario::load(path.as_ref()).unwrap(),
        start: 0,
        count: 200,
        jobs: None,
        checkers: vec![CheckerKind::Sequential, CheckerKind::Atomic, CheckerKind::Abcast],
    };
    let report = run_campaign(&spec).unwrap();
    let table = report.to_table();
    // the atomic column fails on some seeds; print the totals only
    for line in table.lines().take(1 + spec.checkers.len()) {
        println!("{line}");
    }
}
