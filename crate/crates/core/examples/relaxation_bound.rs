//! Column generation for the continuous relaxation, and the upper bound it
//! certifies for the integer problem.
//!
//! `cargo run --example relaxation_bound`

use dopt::local_search::{run, LocalSearchOptions, Start};
use dopt::model::generate_knapsack_instance;
use dopt::pricing::Pricer;
use dopt::relaxation::{column_generation, CgParams};

fn main() -> dopt::Result<()> {
    let inst = generate_knapsack_instance(12, None, 11)?;
    let pricer = Pricer::default();
    let cg = column_generation(&inst, &pricer, &CgParams::default())?;

    for e in &cg.trace {
        println!(
            "iter {:>2}  master {:>9.5}  ν {:.5}  |P'| {:>3}  sparsified {:<5}  exact {}",
            e.iter, e.master_obj, e.nu, e.n_points, e.sparsified, e.ip_solved
        );
    }
    let bound = cg.upper_bound.expect("certified run");
    let (_, ls) = run(&inst, Start::Seed(0), &pricer, &LocalSearchOptions::default())?;
    println!("\nrelaxation {:.5} (certified: {})", cg.master_objective(), cg.certified);
    println!("integer local search {:.5}, gap to bound {:.5}", ls.final_logdet, bound - ls.final_logdet);
    Ok(())
}
