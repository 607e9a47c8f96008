//! Builds the instance families and round-trips one through JSON.
//!
//! `cargo run --example generate_instance`

use dopt::model::{
    generate_cardinality_instance, generate_knapsack_instance, generate_second_order_knapsack_instance,
    unconstrained_first_order_instance, Instance,
};

fn main() -> dopt::Result<()> {
    let instances = [
        generate_cardinality_instance(9, None)?,
        generate_knapsack_instance(12, None, 7)?,
        generate_second_order_knapsack_instance(6, None, 7)?,
        unconstrained_first_order_instance(5, true, 12)?,
    ];
    for inst in &instances {
        println!(
            "{:<13} d={:<2} p={:<3} k={:<3} box={:<5} constraints={}",
            inst.generator,
            inst.d(),
            inst.p(),
            inst.k,
            inst.space.box_size(),
            inst.space.constraints().len()
        );
    }

    let json = instances[1].to_json()?;
    let back = Instance::from_json(&json)?;
    assert_eq!(back.to_json()?, json);
    println!("\nknapsack instance as JSON:\n{json}");
    Ok(())
}
