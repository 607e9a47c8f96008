//! Local search against the relaxation bound over a family of instances.
//!
//! `cargo run --release --example suite`

use dopt::bench::{run_suite, KRule, SuiteOptions, Variant};

fn main() -> dopt::Result<()> {
    let report = run_suite(Variant::Cardinality, 6..=12, KRule::TimesP(2), &[0, 1], &SuiteOptions::default())?;
    print!("{}", report.to_csv()?);
    Ok(())
}
