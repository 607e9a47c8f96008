//! Exchange local search for an integer design, with the approximation
//! factor it guarantees against the integer optimum.
//!
//! `cargo run --example local_search`

use dopt::local_search::{guarantee_factor, run, LocalSearchOptions, Start};
use dopt::model::generate_cardinality_instance;
use dopt::pricing::Pricer;

fn main() -> dopt::Result<()> {
    let inst = generate_cardinality_instance(12, None)?;
    let (design, report) = run(&inst, Start::Seed(1), &Pricer::default(), &LocalSearchOptions::default())?;

    println!("ln det: {:.4} -> {:.4}", report.initial_logdet, report.final_logdet);
    println!(
        "moves: {} heuristic, {} exact ({} exact pricing calls)",
        report.heuristic_moves, report.ip_moves, report.ip_calls
    );
    println!("proved local optimum: {}", report.proved_local_optimum);
    println!("det(S) >= {:.4} · optimum", guarantee_factor(inst.k, inst.p(), 1.0)?);
    println!("\nsupport ({} distinct of k = {}):", design.support().len(), design.k());
    for (x, n) in design.support() {
        println!("  {n} × {:?}", x.0);
    }
    Ok(())
}
