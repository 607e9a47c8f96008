use nalgebra::DMatrix;

use super::{better, Objective, PricingResult, PricingStatus};
use crate::error::{Error, Result};
use crate::model::{Experiment, ExperimentSpace, MonomialModel};

/// Default cap on box points visited by enumeration.
pub const DEFAULT_ENUM_CAP: u128 = 1 << 24;

/// Exact optimum by exhaustive enumeration; ties go to the lexicographically
/// smallest experiment.
pub fn solve_enum(
    g: &DMatrix<f64>,
    space: &ExperimentSpace,
    model: &MonomialModel,
    cap: u128,
) -> Result<PricingResult> {
    solve_enum_with_target(g, space, model, cap, None)
}

pub(crate) fn solve_enum_with_target(
    g: &DMatrix<f64>,
    space: &ExperimentSpace,
    model: &MonomialModel,
    cap: u128,
    target: Option<f64>,
) -> Result<PricingResult> {
    let needed = space.box_size();
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let mut obj = Objective::new(g, model);
    let mut best: Option<(f64, Vec<u32>)> = None;
    let mut nodes = 0u64;
    for x in space.box_points() {
        nodes += 1;
        if !space.contains(&x) {
            continue;
        }
        let v = obj.eval(&x);
        if better(v, &x, best.as_ref().map(|(bv, bx)| (*bv, bx.as_slice()))) {
            best = Some((v, x));
            if let Some(t) = target {
                let (bv, _) = best.as_ref().unwrap();
                if *bv > t {
                    let (value, x) = best.unwrap();
                    return Ok(PricingResult {
                        x: Experiment(x),
                        value,
                        exact: false,
                        nodes,
                        status: PricingStatus::TargetReached,
                    });
                }
            }
        }
    }
    let (value, x) = best.ok_or_else(|| Error::Degenerate("experiment space is empty".into()))?;
    Ok(PricingResult { x: Experiment(x), value, exact: true, nodes, status: PricingStatus::Optimal })
}
