//! Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use fracheat_core::acceptance::run_all;

fn main() {
    println!("\nacceptance criteria");
    let outcomes = run_all(|o| println!("{}", o.line()));
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("\n{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
