//! Every acceptance criterion at its stated tolerance, one line each.
//! Runs without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use cornerlab::verify::{run_suite, Suite};

fn main() -> ExitCode {
    let results = run_suite(Suite::Full);
    for r in &results {
        println!("{}", r.line());
        for c in r.checks.iter().filter(|c| !c.pass) {
            println!("    {} = {:.4e} (tol {:.1e}, {:?})", c.name, c.value, c.tolerance, c.comparison);
        }
    }
    let passed = results.iter().filter(|r| r.pass()).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
