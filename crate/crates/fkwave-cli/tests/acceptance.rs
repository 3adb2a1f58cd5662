//! Acceptance suite: prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reported as `FAIL (known)` and do
//! not fail the suite; every other criterion must pass.

use std::process::ExitCode;
use std::time::Instant;

use fkwave_cli::checks::{run_criterion, CRITERIA, KNOWN_FAILURES};

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored.
    let mut unexpected = 0;
    println!("\nrunning acceptance criteria");
    for (id, _) in CRITERIA {
        let start = Instant::now();
        let o = run_criterion(id, 0);
        println!("{} [{:.1}s]", o.line(), start.elapsed().as_secs_f64());
        if !o.pass && !KNOWN_FAILURES.contains(&id) {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        println!("acceptance: ok ({} known failure(s))\n", KNOWN_FAILURES.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {unexpected} unexpected failure(s)\n");
        ExitCode::FAILURE
    }
}
