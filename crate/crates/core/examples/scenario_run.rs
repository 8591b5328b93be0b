//! Load a bundled scenario, run its checks and print the summary lines.
//!
//! cargo run --release --example scenario_run -- scenarios/apriori-cosine.cfg

use finsler_core::runner::{run_scenario, RunOptions};
use finsler_core::scenario::Scenario;
use std::path::PathBuf;

fn main() -> finsler_core::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/apriori-cosine.cfg"));
    let scenario = Scenario::load(&path)?;
    let out = std::env::temp_dir().join(format!("finsler-lab-{}", scenario.name));
    let outcome = run_scenario(&scenario, &RunOptions { out: Some(out), ..Default::default() })?;
    for c in &outcome.summary.checks {
        println!("{}", c.line());
    }
    println!("outputs in {}", outcome.out_dir.display());
    println!("exit status {}", outcome.summary.exit_code());
    Ok(())
}
