//! Run the built-in verification suites and summarise them.
//!
//! ```text
//! cargo run --release --example verify_suites [holder bias ...]
//! ```

use clap::ValueEnum;
use heavytail::harness::verify::{run_suite, Suite};

fn main() {
    let picked: Vec<Suite> = std::env::args()
        .skip(1)
        .filter_map(|a| Suite::from_str(&a, true).ok())
        .collect();
    let suites = if picked.is_empty() {
        vec![Suite::Bias, Suite::Holder, Suite::Ordering]
    } else {
        picked
    };
    for suite in suites {
        let report = run_suite(suite, 0);
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
        println!(
            "{:<10} {}/{} checks passed",
            suite.name(),
            report.checks.len() - failed.len(),
            report.checks.len()
        );
        for c in failed {
            println!("  FAIL {}: {}", c.name, c.detail);
        }
    }
}
