//! The invariant suites behind `fadesched verify`, run from library code.
//!
//!     cargo run --release --example verify_suites

use fadesched::verify::{run, Suite, VerifyOptions};

fn main() -> fadesched::Result<()> {
    let opts = VerifyOptions {
        dp_points: 128,
        ..VerifyOptions::default()
    };
    let checks = run(&Suite::ALL, &opts)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    Ok(())
}
