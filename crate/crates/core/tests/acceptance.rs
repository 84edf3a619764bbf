//! Acceptance criteria 1 to 13 against the reference configuration.
//!
//! Prints one PASS/FAIL line per criterion with the measured values and their limits, then
//! exits nonzero if any criterion failed.

use std::process::ExitCode;
use std::time::Instant;

use ptstring::simulator::SimulationSetup;
use ptstring::verify::{self, Check, SuiteRuns};

fn main() -> ExitCode {
    let start = Instant::now();
    let mut checks: Vec<Check> = vec![
        verify::check_minimal_time(),
        verify::check_kernel_diagonal(),
        verify::check_oracle_agreement(),
        verify::check_kernel_bound(),
        verify::check_bessel(),
        verify::check_moment_identities(),
        verify::check_gain_derivatives(),
    ];
    match SuiteRuns::compute(&SimulationSetup::reference()) {
        Ok(runs) => checks.extend([
            runs.check_open_loop(),
            runs.check_closed_loop_decay(),
            runs.check_ic_independence(),
            runs.check_round_trip(),
            runs.check_inequalities(),
            runs.check_bounded_control(),
        ]),
        Err(e) => println!("FAIL criteria 8-13: reference runs failed: {e}"),
    }
    for c in &checks {
        println!("{}", c.summary_line());
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).filter_map(|c| c.criterion.map(|n| n.to_string())).collect();
    let complete = checks.len() == 13;
    println!(
        "acceptance: {} of 13 criteria passed in {:.1} s{}",
        checks.iter().filter(|c| c.passed).count(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    if failed.is_empty() && complete {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
