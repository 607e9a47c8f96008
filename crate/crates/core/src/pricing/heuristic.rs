use nalgebra::DMatrix;

use super::{value_tol, Objective, PricingResult, PricingStatus};
use crate::error::{Error, Result};
use crate::model::{Experiment, ExperimentSpace, MonomialModel};

/// First-improvement ascent over Bit Flip (`x ± e_i`) and Bit Swap
/// (`x + e_i - e_j`) neighbors, feasibility checked per move.
///
/// Neighbor order: `i` increasing with `+e_i` before `-e_i`, then pairs
/// `(i, j)`, `i ≠ j`, lexicographic. After an accepted move the scan restarts.
pub fn heuristic_search(
    g: &DMatrix<f64>,
    space: &ExperimentSpace,
    model: &MonomialModel,
    start: &[u32],
) -> Result<PricingResult> {
    if !space.contains(start) {
        return Err(Error::Infeasible(start.to_vec()));
    }
    let mut obj = Objective::new(g, model);
    let mut x = start.to_vec();
    let mut value = obj.eval(&x);
    let d = space.d();
    let top = space.levels() - 1;
    let mut moves = 0u64;
    'outer: loop {
        let mut cand = x.clone();
        for i in 0..d {
            for up in [true, false] {
                if (up && x[i] == top) || (!up && x[i] == 0) {
                    continue;
                }
                cand[i] = if up { x[i] + 1 } else { x[i] - 1 };
                if space.contains(&cand) {
                    let v = obj.eval(&cand);
                    if v > value + value_tol(value) {
                        x.clone_from(&cand);
                        value = v;
                        moves += 1;
                        continue 'outer;
                    }
                }
                cand[i] = x[i];
            }
        }
        for i in 0..d {
            if x[i] == top {
                continue;
            }
            for j in 0..d {
                if j == i || x[j] == 0 {
                    continue;
                }
                cand[i] = x[i] + 1;
                cand[j] = x[j] - 1;
                if space.contains(&cand) {
                    let v = obj.eval(&cand);
                    if v > value + value_tol(value) {
                        x.clone_from(&cand);
                        value = v;
                        moves += 1;
                        continue 'outer;
                    }
                }
                cand[i] = x[i];
                cand[j] = x[j];
            }
        }
        break;
    }
    Ok(PricingResult { x: Experiment(x), value, exact: false, nodes: moves, status: PricingStatus::Heuristic })
}
