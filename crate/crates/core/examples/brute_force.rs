//! Exhaustive optimum on a tiny instance, compared with local search.
//!
//! `cargo run --example brute_force`

use dopt::bench::{brute_force_dopt, multiset_count, DEFAULT_BRUTE_CAP};
use dopt::local_search::{run, LocalSearchOptions, Start};
use dopt::model::generate_cardinality_with_bound;
use dopt::pricing::Pricer;

fn main() -> dopt::Result<()> {
    let inst = generate_cardinality_with_bound(4, 2, Some(7))?;
    let n = inst.space.feasible_points().count();
    println!("{n} feasible points, {} multisets of size {}", multiset_count(n, inst.k), inst.k);

    let brute = brute_force_dopt(&inst, DEFAULT_BRUTE_CAP)?;
    let (_, ls) = run(&inst, Start::Seed(0), &Pricer::enumerate(), &LocalSearchOptions::default())?;
    println!("optimum      {:.6}", brute.optimum_logdet);
    println!("local search {:.6}", ls.final_logdet);
    for (x, m) in brute.optimal_design.support() {
        println!("  {m} × {:?}", x.0);
    }
    Ok(())
}
