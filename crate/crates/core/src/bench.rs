//! Exhaustive oracles and instance suites.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::local_search::{self, Design, LocalSearchOptions, Start};
use crate::model::{
    default_budget, generate_cardinality_instance, generate_knapsack_instance, generate_second_order_knapsack_instance,
    Experiment, Instance,
};
use crate::pricing::Pricer;
use crate::relaxation::{column_generation, CgParams};

/// Default cap on multisets examined by [`brute_force_dopt`].
pub const DEFAULT_BRUTE_CAP: u128 = 10_000_000;

#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub optimum_logdet: f64,
    pub optimal_design: Design,
    pub multisets_examined: u64,
}

/// `C(n + k - 1, k)`, saturating.
pub fn multiset_count(n: usize, k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c.saturating_mul(n as u128 + i) / (i + 1);
    }
    c
}

/// Exact integer optimum over all size-`k` multisets of `𝒴`;
/// rank-deficient multisets score `-∞`. Ties keep the first multiset in
/// lexicographic order of point indices.
pub fn brute_force_dopt(instance: &Instance, cap: u128) -> Result<BruteForceResult> {
    let box_cap = cap.max(1 << 20);
    if instance.space.box_size() > box_cap {
        return Err(Error::CapExceeded { needed: instance.space.box_size(), cap: box_cap });
    }
    let points: Vec<Experiment> = instance.space.feasible_points().collect();
    if points.is_empty() {
        return Err(Error::Degenerate("experiment space is empty".into()));
    }
    let needed = multiset_count(points.len(), instance.k);
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let vs: Vec<Vec<f64>> = points.iter().map(|x| instance.model.eval_f64(x)).collect();
    let p = instance.p();
    let mut search = Brute {
        vs: &vs,
        p,
        k: instance.k,
        stack: Vec::with_capacity(instance.k),
        best: f64::NEG_INFINITY,
        best_idx: None,
        examined: 0,
    };
    search.dfs(DMatrix::zeros(p, p), 0);
    let idx = search.best_idx.ok_or_else(|| {
        Error::Degenerate(format!("no size-{} multiset of the experiment space has rank {p}", instance.k))
    })?;
    let design = Design::from_counts(&instance.model, idx.iter().map(|&i| (points[i].clone(), 1)))?;
    Ok(BruteForceResult {
        optimum_logdet: design.logdet(),
        optimal_design: design,
        multisets_examined: search.examined,
    })
}

struct Brute<'a> {
    vs: &'a [Vec<f64>],
    p: usize,
    k: usize,
    stack: Vec<usize>,
    best: f64,
    best_idx: Option<Vec<usize>>,
    examined: u64,
}

impl Brute<'_> {
    fn dfs(&mut self, s: DMatrix<f64>, from: usize) {
        if self.stack.len() == self.k {
            self.examined += 1;
            if let Some(chol) = s.clone().cholesky() {
                let ld = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                let tol = 1e-12 * ld.abs().max(1.0);
                if ld.is_finite() && ld > self.best + tol && rank_ok(&s, self.p) {
                    self.best = ld;
                    self.best_idx = Some(self.stack.clone());
                }
            }
            return;
        }
        for i in from..self.vs.len() {
            let mut next = s.clone();
            let v = nalgebra::DVector::from_column_slice(&self.vs[i]);
            next.ger(1.0, &v, &v, 1.0);
            self.stack.push(i);
            self.dfs(next, i);
            self.stack.pop();
        }
    }
}

fn rank_ok(s: &DMatrix<f64>, p: usize) -> bool {
    crate::linalg::pivoted_rank(s).map(|(r, _)| r == p).unwrap_or(false)
}

/// Instance families of the suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Cardinality,
    Knapsack,
    SecondOrder,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cardinality" => Ok(Variant::Cardinality),
            "knapsack" => Ok(Variant::Knapsack),
            "second_order" | "second-order" => Ok(Variant::SecondOrder),
            _ => Err(Error::InvalidArgument(format!("unknown variant {s:?}"))),
        }
    }
}

impl Variant {
    /// The instance for `(d, seed)` with budget from `k_rule`.
    pub fn instance(self, d: usize, seed: u64, k_rule: KRule) -> Result<Instance> {
        let mut inst = match self {
            Variant::Cardinality => generate_cardinality_instance(d, None)?,
            Variant::Knapsack => generate_knapsack_instance(d, None, seed)?,
            Variant::SecondOrder => generate_second_order_knapsack_instance(d, None, seed)?,
        };
        let k = k_rule.budget(inst.p());
        if k < inst.p() {
            return Err(Error::Degenerate(format!("budget k={k} is below p={}", inst.p())));
        }
        inst.k = k;
        Ok(inst)
    }
}

/// Budget as a function of `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    TimesP(usize),
    Fixed(usize),
}

impl Default for KRule {
    fn default() -> Self {
        KRule::TimesP(default_budget(1))
    }
}

impl KRule {
    pub fn budget(self, p: usize) -> usize {
        match self {
            KRule::TimesP(c) => c * p,
            KRule::Fixed(k) => k,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SuiteOptions {
    pub pricer: Pricer,
    pub local_search: LocalSearchOptions,
    /// `seed` is replaced per row.
    pub cg: CgParams,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

/// One suite row; fields serialize in this order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteRow {
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub ls_value: f64,
    pub relax_value: f64,
    pub gap: f64,
    pub ls_time: f64,
    pub cg_time: f64,
    pub ip_calls: usize,
    pub iterations: usize,
    /// `ok`, or the failure that left the row incomplete.
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub variant: Variant,
    pub rows: Vec<SuiteRow>,
}

pub const SUITE_COLUMNS: [&str; 11] =
    ["d", "k", "seed", "ls_value", "relax_value", "gap", "ls_time", "cg_time", "ip_calls", "iterations", "status"];

impl SuiteReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Report with wall-clock columns zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> SuiteReport {
        let rows = self.rows.iter().map(|r| SuiteRow { ls_time: 0.0, cg_time: 0.0, ..r.clone() }).collect();
        SuiteReport { variant: self.variant, rows }
    }
}

/// Local search and column generation on every `(d, seed)`; failures are
/// recorded per row. Rows are sorted by `(d, seed)`.
pub fn run_suite(
    variant: Variant,
    d_range: std::ops::RangeInclusive<usize>,
    k_rule: KRule,
    seeds: &[u64],
    opts: &SuiteOptions,
) -> Result<SuiteReport> {
    let jobs: Vec<(usize, u64)> = d_range.flat_map(|d| seeds.iter().map(move |&s| (d, s))).collect();
    let run = || jobs.par_iter().map(|&(d, seed)| suite_row(variant, d, seed, k_rule, opts)).collect::<Vec<_>>();
    let mut rows = if opts.threads == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run)
    };
    rows.sort_by_key(|r| (r.d, r.seed));
    Ok(SuiteReport { variant, rows })
}

fn suite_row(variant: Variant, d: usize, seed: u64, k_rule: KRule, opts: &SuiteOptions) -> SuiteRow {
    let mut row = SuiteRow {
        d,
        k: 0,
        seed,
        ls_value: f64::NAN,
        relax_value: f64::NAN,
        gap: f64::NAN,
        ls_time: 0.0,
        cg_time: 0.0,
        ip_calls: 0,
        iterations: 0,
        status: "ok".into(),
    };
    let inst = match variant.instance(d, seed, k_rule) {
        Ok(i) => i,
        Err(e) => {
            row.status = e.to_string();
            return row;
        }
    };
    row.k = inst.k;
    let t = Instant::now();
    match local_search::run(&inst, Start::Seed(seed), &opts.pricer, &opts.local_search) {
        Ok((_, rep)) => {
            row.ls_value = rep.final_logdet;
            row.ip_calls = rep.ip_calls;
            row.iterations = rep.iterations;
            if rep.inconclusive {
                row.status = "local search inconclusive".into();
            }
        }
        Err(e) => {
            row.ls_time = t.elapsed().as_secs_f64();
            row.status = format!("local search: {e}");
            return row;
        }
    }
    row.ls_time = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let cg = CgParams { seed, ..opts.cg.clone() };
    match column_generation(&inst, &opts.pricer, &cg) {
        Ok(r) if r.certified => row.relax_value = r.upper_bound.unwrap_or(f64::NAN),
        Ok(_) => row.status = "relaxation not certified".into(),
        Err(e) => row.status = format!("relaxation: {e}"),
    }
    row.cg_time = t.elapsed().as_secs_f64();
    row.gap = row.relax_value - row.ls_value;
    row
}
