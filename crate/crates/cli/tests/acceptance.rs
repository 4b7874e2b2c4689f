//! Runs the fourteen acceptance criteria at default settings, one line each.

use std::process::ExitCode;

use detbound_cli::selftest::run_suite;
use detbound_cli::RunConfig;

fn main() -> ExitCode {
    let outcomes = run_suite(&RunConfig::default(), |o| println!("{}", o.line()));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
