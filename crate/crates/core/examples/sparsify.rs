//! Shrinks a dense continuous design to a small support with the same
//! moment matrix.
//!
//! `cargo run --example sparsify`

use dopt::model::{eval_design_point, unconstrained_first_order_instance};
use dopt::relaxation::{sparsify, support_bound, ContinuousDesign};

fn main() -> dopt::Result<()> {
    let inst = unconstrained_first_order_instance(6, false, 14)?;
    let pts =
        inst.space.feasible_points().map(|x| eval_design_point(&inst.model, &x.0)).collect::<dopt::Result<Vec<_>>>()?;
    let n = pts.len();
    let k = inst.k as f64;
    let dense = ContinuousDesign::new(pts, vec![k / n as f64; n], k)?;
    let sparse = sparsify(&dense)?;

    let drift = (dense.moment().matrix() - sparse.moment().matrix()).norm() / dense.moment().matrix().norm();
    println!("support {} -> {} (bound {})", n, sparse.support().len(), support_bound(inst.p()));
    println!("relative moment drift {drift:.2e}");
    println!("objective {:.6} -> {:.6}", dense.objective(), sparse.objective());
    Ok(())
}
