use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, SolveOutcome, Variable};
use nalgebra::DMatrix;

use super::linearize::{build_linearization, LinearizedProgram};
use super::{better, Objective, PricingResult, PricingStatus};
use crate::error::{Error, Result};
use crate::model::{Experiment, ExperimentSpace, MonomialModel};

pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

const FRAC_TOL: f64 = 1e-7;
/// Relative slack when pruning a node against the incumbent.
const PRUNE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct BbOptions {
    pub node_limit: u64,
}

impl Default for BbOptions {
    fn default() -> Self {
        BbOptions { node_limit: DEFAULT_NODE_LIMIT }
    }
}

/// Exact pricing by depth-first branch-and-bound over the linearization.
///
/// Nodes are bounded by the LP relaxation (McCormick envelopes, only the side
/// that can bind for the sign of each auxiliary's coefficient), branching on
/// the most fractional bit. With `target`, the search returns as soon as the
/// incumbent exceeds it (`exact = false`); `target = -∞` returns the warm
/// start immediately.
pub fn solve_bb(
    g: &DMatrix<f64>,
    space: &ExperimentSpace,
    model: &MonomialModel,
    incumbent: Option<&PricingResult>,
    target: Option<f64>,
    opts: &BbOptions,
) -> Result<PricingResult> {
    let prog = build_linearization(g, space, model)?;
    let mut search = Search {
        prog: &prog,
        obj: Objective::new(g, model),
        best: None,
        nodes: 0,
        node_limit: opts.node_limit,
        target,
        stop: None,
        bit_vars: Vec::new(),
    };
    if let Some(inc) = incumbent {
        if space.contains(&inc.x) {
            let v = search.obj.eval(&inc.x);
            search.best = Some((v, inc.x.0.clone()));
            if let Some(t) = target {
                if v > t {
                    return Ok(search.finish(PricingStatus::TargetReached));
                }
            }
        }
    }

    if prog.n_bits == 0 {
        let x = prog.decode(&[]);
        if space.contains(&x) {
            search.offer(x);
        }
        search.nodes = 1;
        return search.into_result();
    }

    let (problem, bit_vars) = build_lp(&prog);
    search.bit_vars = bit_vars;
    match problem.solve() {
        Ok(SolveOutcome::Solution(root)) => search.dfs(root)?,
        Ok(SolveOutcome::Interrupted(_)) => return Err(Error::Lp("root relaxation interrupted".into())),
        Err(microlp::Error::Infeasible) => {}
        Err(e) => return Err(Error::Lp(e.to_string())),
    }
    search.into_result()
}

fn build_lp(prog: &LinearizedProgram) -> (Problem, Vec<Variable>) {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let bits: Vec<Variable> = prog.linear.iter().map(|&c| problem.add_var(c, (0.0, 1.0))).collect();
    for t in &prog.aux {
        let y = problem.add_var(t.coef, (0.0, 1.0));
        if t.coef > 0.0 {
            for &b in &t.bits {
                problem.add_constraint([(y, 1.0), (bits[b], -1.0)], ComparisonOp::Le, 0.0);
            }
        } else {
            let mut expr: Vec<(Variable, f64)> = t.bits.iter().map(|&b| (bits[b], 1.0)).collect();
            expr.push((y, -1.0));
            problem.add_constraint(expr, ComparisonOp::Le, t.bits.len() as f64 - 1.0);
        }
    }
    for row in &prog.rows {
        let expr: Vec<(Variable, f64)> = row.terms.iter().map(|&(b, c)| (bits[b], c)).collect();
        problem.add_constraint(expr, ComparisonOp::Le, row.rhs);
    }
    (problem, bits)
}

struct Search<'a> {
    prog: &'a LinearizedProgram,
    obj: Objective<'a>,
    best: Option<(f64, Vec<u32>)>,
    nodes: u64,
    node_limit: u64,
    target: Option<f64>,
    stop: Option<PricingStatus>,
    bit_vars: Vec<Variable>,
}

impl Search<'_> {
    fn offer(&mut self, x: Vec<u32>) {
        let v = self.obj.eval(&x);
        if better(v, &x, self.best.as_ref().map(|(bv, bx)| (*bv, bx.as_slice()))) {
            self.best = Some((v, x));
        }
        if let (Some(t), Some((bv, _))) = (self.target, &self.best) {
            if *bv > t {
                self.stop = Some(PricingStatus::TargetReached);
            }
        }
    }

    fn dfs(&mut self, sol: Solution) -> Result<()> {
        if self.stop.is_some() {
            return Ok(());
        }
        self.nodes += 1;
        if self.nodes > self.node_limit {
            self.stop = Some(PricingStatus::NodeLimit);
            return Ok(());
        }
        let bound = sol.objective() + self.prog.constant;
        if let Some((bv, _)) = &self.best {
            if bound <= bv + PRUNE_TOL * bv.abs().max(1.0) {
                return Ok(());
            }
        }
        let values: Vec<f64> = self.bit_vars.iter().map(|&v| sol.var_value_raw(v)).collect();
        let branch = values
            .iter()
            .enumerate()
            .map(|(i, &z)| (i, (z - z.round()).abs()))
            .filter(|&(_, f)| f > FRAC_TOL)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((b, _)) = branch else {
            let bits: Vec<bool> = values.iter().map(|&z| z > 0.5).collect();
            let x = self.prog.decode(&bits);
            self.offer(x);
            return Ok(());
        };
        let first = if values[b] >= 0.5 { 1.0 } else { 0.0 };
        for val in [first, 1.0 - first] {
            if self.stop.is_some() {
                break;
            }
            match sol.clone().fix_var(self.bit_vars[b], val) {
                Ok(SolveOutcome::Solution(child)) => self.dfs(child)?,
                Ok(SolveOutcome::Interrupted(_)) => return Err(Error::Lp("node relaxation interrupted".into())),
                Err(microlp::Error::Infeasible) => {}
                Err(e) => return Err(Error::Lp(e.to_string())),
            }
        }
        Ok(())
    }

    fn finish(self, status: PricingStatus) -> PricingResult {
        let (value, x) = self.best.expect("finish requires an incumbent");
        PricingResult { x: Experiment(x), value, exact: status == PricingStatus::Optimal, nodes: self.nodes, status }
    }

    fn into_result(self) -> Result<PricingResult> {
        if self.best.is_none() {
            return Err(match self.stop {
                Some(PricingStatus::NodeLimit) => Error::IterationCap(self.node_limit as usize),
                _ => Error::Degenerate("experiment space is empty".into()),
            });
        }
        let status = self.stop.unwrap_or(PricingStatus::Optimal);
        Ok(self.finish(status))
    }
}
