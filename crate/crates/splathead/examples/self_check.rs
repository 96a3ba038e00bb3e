//! Runs one self-check suite in-process (the same checks as
//! `splathead verify --suite ...`).

use splathead::verify::{run_suite, Suite};

fn main() {
    let suite: Suite = std::env::args().nth(1).as_deref().unwrap_or("invariants").parse().expect("oracle or invariants");
    let outcomes = run_suite(suite, |o| {
        println!("{} {} ({} µs) {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.micros, o.detail);
    });
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} checks, {failed} failed", outcomes.len());
    std::process::exit(i32::from(failed > 0));
}
