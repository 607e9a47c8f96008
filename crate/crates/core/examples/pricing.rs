//! Solves one pricing problem max p(x)ᵀGp(x) three ways.
//!
//! `cargo run --example pricing`

use dopt::linalg::pricing_matrix;
use dopt::local_search::initial_design;
use dopt::model::generate_knapsack_instance;
use dopt::pricing::{solve_bb, solve_enum, BbOptions, Pricer};

fn main() -> dopt::Result<()> {
    let inst = generate_knapsack_instance(14, None, 3)?;
    let design = initial_design(&inst, 0)?;
    let g = pricing_matrix(design.info())?;
    let start = design.scan_order()[0].clone();

    let h = Pricer::default().heuristic(&g, &inst.space, &inst.model, &start.0)?;
    let e = solve_enum(&g, &inst.space, &inst.model, 1 << 24)?;
    let b = solve_bb(&g, &inst.space, &inst.model, Some(&h), None, &BbOptions::default())?;

    println!("heuristic  {:>10.6}  {:?}", h.value, h.x.0);
    println!("enumerate  {:>10.6}  {:?}", e.value, e.x.0);
    println!("B&B        {:>10.6}  {:?}  ({} nodes)", b.value, b.x.0, b.nodes);
    Ok(())
}
