//! Runs the property suites in memory and prints each check.

use dshadow::harness::{verify_all, Selector};

fn main() {
    let summary = verify_all(&Selector::default(), 42, false);
    for s in &summary.suites {
        for c in &s.checks {
            println!(
                "{} {}/{}: {:.3e} <= {:.1e} over {} samples",
                if c.passed { "pass" } else { "FAIL" },
                s.suite,
                c.name,
                c.max_residual,
                c.threshold,
                c.samples
            );
        }
    }
    println!("all passed: {}", summary.passed);
}
