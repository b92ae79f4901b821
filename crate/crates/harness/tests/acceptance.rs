//! Runs every acceptance criterion and prints one line per criterion.
//!
//! `BURGULENCE_ACCEPTANCE_SEED` overrides the master seed; `BURGULENCE_ACCEPTANCE_ONLY`
//! takes a comma-separated list of criterion names.

use std::process::ExitCode;

use burgulence_harness::acceptance::{AcceptanceSuite, CRITERIA, DEFAULT_SEED};

fn main() -> ExitCode {
    // libtest flags (e.g. --list, filters) are passed through by cargo; only --list needs an answer
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let seed = std::env::var("BURGULENCE_ACCEPTANCE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED);
    let only: Option<Vec<String>> =
        std::env::var("BURGULENCE_ACCEPTANCE_ONLY").ok().map(|s| s.split(',').map(|c| c.trim().to_string()).collect());
    let suite = AcceptanceSuite::new(seed);
    println!("acceptance suite, master seed {seed}");
    let mut failed = 0;
    let mut ran = 0;
    for name in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.iter().any(|c| c == name)) {
            continue;
        }
        let outcome = suite.evaluate(name);
        println!("{}", outcome.line());
        ran += 1;
        if !outcome.passed {
            failed += 1;
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
