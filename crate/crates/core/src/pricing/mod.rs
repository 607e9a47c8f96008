//! The pricing problem `max_{x ∈ 𝒴} p(x)ᵀ G p(x)` for PSD `G`.
//!
//! Local search uses it to find an improving exchange, column generation to
//! separate violated dual constraints. Three solvers share one result type:
//! a Bit Flip / Bit Swap ascent ([`heuristic_search`]), exhaustive
//! enumeration ([`solve_enum`]) and branch-and-bound over a McCormick
//! linearization ([`solve_bb`]).

mod bb;
mod enumerate;
mod heuristic;
mod linearize;

pub use bb::{solve_bb, BbOptions, DEFAULT_NODE_LIMIT};
pub use enumerate::{solve_enum, DEFAULT_ENUM_CAP};
pub use heuristic::heuristic_search;
pub use linearize::{build_linearization, AuxTerm, LinearizedProgram};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Result;
use crate::model::{Experiment, ExperimentSpace, MonomialModel};

/// How a pricing result was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingStatus {
    /// Local optimum of the neighborhood ascent.
    Heuristic,
    /// Proven optimum.
    Optimal,
    /// Stopped early because the value exceeded the caller's target.
    TargetReached,
    /// Node limit hit; best found so far, no proof.
    NodeLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PricingResult {
    pub x: Experiment,
    pub value: f64,
    /// True iff the value carries an optimality proof.
    pub exact: bool,
    pub nodes: u64,
    pub status: PricingStatus,
}

impl PricingResult {
    pub fn hit_limit(&self) -> bool {
        self.status == PricingStatus::NodeLimit
    }
}

/// `p(x)ᵀ G p(x)` with a reusable buffer.
pub struct Objective<'a> {
    g: &'a DMatrix<f64>,
    model: &'a MonomialModel,
    buf: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(g: &'a DMatrix<f64>, model: &'a MonomialModel) -> Self {
        Objective { g, model, buf: vec![0.0; model.p()] }
    }

    pub fn eval(&mut self, x: &[u32]) -> f64 {
        self.model.eval_into(x, &mut self.buf);
        quad_form(self.g, &self.buf)
    }
}

pub fn quad_form(g: &DMatrix<f64>, v: &[f64]) -> f64 {
    let p = v.len();
    let mut total = 0.0;
    for j in 0..p {
        if v[j] == 0.0 {
            continue;
        }
        let col = g.column(j);
        let mut acc = 0.0;
        for i in 0..p {
            acc += col[i] * v[i];
        }
        total += acc * v[j];
    }
    total
}

/// Tie tolerance when comparing objective values.
pub(crate) fn value_tol(v: f64) -> f64 {
    1e-12 * v.abs().max(1.0)
}

/// Whether `(value, x)` beats `(best, best_x)`: strictly larger value, or an
/// equal value with a lexicographically smaller experiment.
pub(crate) fn better(value: f64, x: &[u32], best: Option<(f64, &[u32])>) -> bool {
    match best {
        None => true,
        Some((bv, bx)) => {
            let tol = value_tol(bv);
            value > bv + tol || ((value - bv).abs() <= tol && x < bx)
        }
    }
}

/// Exact solver selection for [`Pricer`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactMethod {
    Enumerate,
    BranchAndBound,
    /// Enumerate when the box has at most `enum_threshold` points.
    Auto {
        enum_threshold: u128,
    },
}

/// Pricing configuration shared by local search and column generation.
#[derive(Clone, Debug, Serialize)]
pub struct Pricer {
    pub exact_method: ExactMethod,
    pub enum_cap: u128,
    pub node_limit: u64,
}

impl Default for Pricer {
    fn default() -> Self {
        Pricer {
            exact_method: ExactMethod::Auto { enum_threshold: 1 << 16 },
            enum_cap: DEFAULT_ENUM_CAP,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

impl Pricer {
    pub fn enumerate() -> Self {
        Pricer { exact_method: ExactMethod::Enumerate, ..Pricer::default() }
    }

    pub fn branch_and_bound() -> Self {
        Pricer { exact_method: ExactMethod::BranchAndBound, ..Pricer::default() }
    }

    pub fn heuristic(
        &self,
        g: &DMatrix<f64>,
        space: &ExperimentSpace,
        model: &MonomialModel,
        start: &[u32],
    ) -> Result<PricingResult> {
        heuristic_search(g, space, model, start)
    }

    /// Exact solve; with a `target`, may stop early once the value exceeds it.
    pub fn exact(
        &self,
        g: &DMatrix<f64>,
        space: &ExperimentSpace,
        model: &MonomialModel,
        incumbent: Option<&PricingResult>,
        target: Option<f64>,
    ) -> Result<PricingResult> {
        let use_enum = match self.exact_method {
            ExactMethod::Enumerate => true,
            ExactMethod::BranchAndBound => false,
            ExactMethod::Auto { enum_threshold } => space.box_size() <= enum_threshold,
        };
        if use_enum {
            enumerate::solve_enum_with_target(g, space, model, self.enum_cap, target)
        } else {
            let opts = BbOptions { node_limit: self.node_limit };
            solve_bb(g, space, model, incumbent, target, &opts)
        }
    }
}
