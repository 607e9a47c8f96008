use std::collections::HashSet;

use serde::Serialize;

use super::master::line_search_step;
use super::{
    check_from, dual_from_primal, full_certificate, solve_restricted_master, solve_restricted_master_from, sparsify,
    ContinuousDesign, DualCertificate, MasterOptions,
};
use crate::error::{Error, Result};
use crate::local_search::sample_spanning;
use crate::model::{eval_design_point, seeded_rng, DesignPoint, Experiment, Instance};
use crate::pricing::Pricer;

#[derive(Clone, Debug, Serialize)]
pub struct CgParams {
    /// Heuristic pricing is trusted when its value reaches `(1+δ)ν`.
    pub delta: f64,
    /// Stop when exact pricing gives `α ≤ (1+ε)ν`.
    pub epsilon: f64,
    /// Switch to dual mode when the relative master improvement drops below `γ`.
    pub gamma: f64,
    pub seed: u64,
    pub master: MasterOptions,
    pub max_iterations: usize,
    pub sample_cap: usize,
}

impl Default for CgParams {
    fn default() -> Self {
        CgParams {
            delta: 0.05,
            epsilon: 1e-4,
            gamma: 1e-6,
            seed: 0,
            master: MasterOptions::default(),
            max_iterations: 10_000,
            sample_cap: crate::local_search::DEFAULT_SAMPLE_CAP,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CgMode {
    Primal,
    Dual,
}

/// One line of the column-generation trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CgTraceEntry {
    pub iter: usize,
    pub master_obj: f64,
    pub nu: f64,
    /// Exact pricing value, when an exact solve ran this iteration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// `kα − ln det Λ − p` for that `α`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
    pub mode: CgMode,
    /// `|𝒫′|` after this iteration's sparsification, before new columns.
    pub n_points: usize,
    pub sparsified: bool,
    pub ip_solved: bool,
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub design: ContinuousDesign,
    /// Experiments behind `design.points()`, index-aligned.
    pub experiments: Vec<Experiment>,
    /// Full-scope when `certified`, otherwise the last restricted certificate.
    pub certificate: DualCertificate,
    /// Best proven upper bound on the relaxation over all iterations.
    pub upper_bound: Option<f64>,
    /// Terminated through an exact pricing proof.
    pub certified: bool,
    /// Stopped because exact pricing hit its limits.
    pub inconclusive: bool,
    pub iterations: usize,
    pub mode: CgMode,
    pub trace: Vec<CgTraceEntry>,
}

impl CgResult {
    pub fn master_objective(&self) -> f64 {
        self.design.objective()
    }

    pub fn trace_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

struct Columns {
    experiments: Vec<Experiment>,
    points: Vec<DesignPoint>,
    seen: HashSet<Experiment>,
}

impl Columns {
    fn push(&mut self, instance: &Instance, x: Experiment) -> Result<bool> {
        if !self.seen.insert(x.clone()) {
            return Ok(false);
        }
        self.points.push(eval_design_point(&instance.model, &x)?);
        self.experiments.push(x);
        Ok(true)
    }

    fn retain(&mut self, keep: &[usize]) {
        self.experiments = keep.iter().map(|&i| self.experiments[i].clone()).collect();
        self.points = keep.iter().map(|&i| self.points[i].clone()).collect();
        self.seen = self.experiments.iter().cloned().collect();
    }
}

/// Column generation for the continuous relaxation.
///
/// Each iteration solves the restricted master, extracts `(Λ, ν)`, and
/// prices `G = Λ`: the heuristic first, exact pricing when the heuristic
/// stays below `(1+δ)ν`. An exact `α ≤ (1+ε)ν` ends the run with a full
/// certificate. Otherwise the violating point joins `𝒫′` with `p−1` random
/// feasible points (`2(p−1)²` in dual mode). In primal mode `𝒫′` is
/// sparsified to the master's support once it exceeds `⌈p²/3⌉`; a relative
/// master gain below `γ` switches permanently to dual mode, which skips
/// sparsification.
pub fn column_generation(instance: &Instance, pricer: &Pricer, params: &CgParams) -> Result<CgResult> {
    let p = instance.p();
    let k = instance.k as f64;
    let mut rng = seeded_rng(params.seed);
    let mut cols = Columns { experiments: Vec::new(), points: Vec::new(), seen: HashSet::new() };
    for x in sample_spanning(instance, &mut rng, params.sample_cap, 2 * p)? {
        cols.push(instance, x)?;
    }
    let sparsify_above = (p * p).div_ceil(3);
    let mut mode = CgMode::Primal;
    let mut trace: Vec<CgTraceEntry> = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    let mut prev_obj: Option<f64> = None;
    let mut best_bound: Option<f64> = None;

    for iter in 1..=params.max_iterations {
        let mut cd = match &warm {
            None => solve_restricted_master(&cols.points, k, &params.master)?,
            Some(w) => solve_restricted_master_from(&cols.points, k, w, &params.master)?,
        };
        let mut sparsified = false;
        if mode == CgMode::Primal && cols.points.len() > sparsify_above {
            let sp = sparsify(&cd)?;
            let keep = sp.support();
            let weights: Vec<f64> = keep.iter().map(|&i| sp.weights()[i]).collect();
            cols.retain(&keep);
            cd = ContinuousDesign::new(cols.points.clone(), weights, k)?;
            sparsified = true;
        }
        let obj = cd.objective();
        if let Some(prev) = prev_obj {
            if mode == CgMode::Primal && (obj - prev) / prev.abs().max(1.0) < params.gamma {
                mode = CgMode::Dual;
            }
        }
        prev_obj = Some(obj);
        let cert = dual_from_primal(&cd)?;
        let nu = cert.nu;

        let start = argmax_point(&cd, &cols.experiments);
        let h = pricer.heuristic(&cert.lambda, &instance.space, &instance.model, &start)?;
        let mut entry = CgTraceEntry {
            iter,
            master_obj: obj,
            nu,
            alpha: None,
            upper_bound: None,
            mode,
            n_points: cols.points.len(),
            sparsified,
            ip_solved: false,
        };
        let violator = if h.value >= (1.0 + params.delta) * nu {
            h.x
        } else {
            let r = pricer.exact(&cert.lambda, &instance.space, &instance.model, Some(&h), None)?;
            entry.ip_solved = true;
            let check = check_from(r);
            if check.exact {
                let full = full_certificate(&cert, &check)?;
                entry.alpha = Some(check.alpha);
                entry.upper_bound = Some(full.objective);
                best_bound = Some(best_bound.map_or(full.objective, |b: f64| b.min(full.objective)));
                if check.alpha <= (1.0 + params.epsilon) * nu {
                    trace.push(entry);
                    return Ok(finish(cd, cols, full, best_bound, true, false, iter, mode, trace));
                }
            } else if check.alpha <= (1.0 + params.epsilon) * nu {
                trace.push(entry);
                return Ok(finish(cd, cols, cert, best_bound, false, true, iter, mode, trace));
            }
            check.point
        };
        trace.push(entry);

        // warm start: current weights, a line-search step onto the violator,
        // zero weight on random columns
        let mut w = cd.weights().to_vec();
        let vx = eval_design_point(&instance.model, &violator)?.to_f64();
        let omega = cd.moment().inv_quad(&vx).unwrap_or(0.0) * k;
        let tau = line_search_step(omega, p);
        let added = cols.push(instance, violator.clone())?;
        w.iter_mut().for_each(|x| *x *= 1.0 - tau);
        if added {
            w.push(tau * k);
        } else if let Some(i) = cols.experiments.iter().position(|x| *x == violator) {
            w[i] += tau * k;
        }
        let extra = match mode {
            CgMode::Primal => p - 1,
            CgMode::Dual => 2 * (p - 1) * (p - 1),
        };
        for _ in 0..extra {
            let Some(x) = instance.space.sample(&mut rng, params.sample_cap) else { break };
            if cols.push(instance, x)? {
                w.push(0.0);
            }
        }
        warm = Some(w);
    }
    Err(Error::IterationCap(params.max_iterations))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    design: ContinuousDesign,
    cols: Columns,
    certificate: DualCertificate,
    upper_bound: Option<f64>,
    certified: bool,
    inconclusive: bool,
    iterations: usize,
    mode: CgMode,
    trace: Vec<CgTraceEntry>,
) -> CgResult {
    CgResult {
        design,
        experiments: cols.experiments,
        certificate,
        upper_bound,
        certified,
        inconclusive,
        iterations,
        mode,
        trace,
    }
}

/// Stored experiment with the largest `vᵀΛv`, ties to the smallest.
fn argmax_point(cd: &ContinuousDesign, experiments: &[Experiment]) -> Experiment {
    let m = cd.moment();
    let mut best: Option<(f64, &Experiment)> = None;
    for (v, x) in cd.vectors().iter().zip(experiments) {
        let q = m.inv_quad(v).unwrap_or(f64::NEG_INFINITY);
        if best.is_none_or(|(bq, bx)| q > bq || (q == bq && x < bx)) {
            best = Some((q, x));
        }
    }
    best.expect("restricted set is nonempty").1.clone()
}
