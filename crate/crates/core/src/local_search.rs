//! Pricing-based local search over integer designs.
//!
//! A move removes one copy of a support experiment `x'` and adds one
//! experiment `x`. With `S' = S - p(x')p(x')ᵀ`, the best `x` maximizes
//! `p(x)ᵀ G p(x)` where `G` is [`pricing_matrix`]`(S')`, so each candidate
//! `x'` is one pricing problem. Heuristic pricing is tried for every `x'`
//! before any exact solve; a round where every exact solve fails to find an
//! improving move certifies a local optimum.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_kdet, pricing_matrix, rank_one_downdate, rank_one_update, InfoMatrix, SpanBasis};
use crate::model::{seeded_rng, Experiment, Instance, MonomialModel};
use crate::pricing::{Pricer, PricingResult, PricingStatus};

/// Default relative log-det gain a move must exceed.
pub const DEFAULT_TOL_IMPROVE: f64 = 1e-9;
/// Default number of feasible-point draws for [`initial_design`].
pub const DEFAULT_SAMPLE_CAP: usize = 100_000;

const REVALIDATE_EVERY: usize = 256;

/// Integer design: experiments with positive multiplicities summing to `k`.
#[derive(Clone, Debug)]
pub struct Design {
    support: BTreeMap<Experiment, usize>,
    k: usize,
    info: InfoMatrix,
}

#[derive(Serialize, Deserialize)]
struct DesignEntry {
    x: Vec<u32>,
    lambda: usize,
}

#[derive(Serialize, Deserialize)]
struct DesignFile {
    points: Vec<DesignEntry>,
    k: usize,
}

impl Design {
    /// Builds a design from `(experiment, multiplicity)` pairs; repeated
    /// experiments are merged and zero multiplicities dropped.
    pub fn from_counts<I>(model: &MonomialModel, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Experiment, usize)>,
    {
        let mut support = BTreeMap::new();
        for (x, n) in counts {
            if x.len() != model.d() {
                return Err(Error::DimensionMismatch { expected: model.d(), got: x.len() });
            }
            if n > 0 {
                *support.entry(x).or_insert(0) += n;
            }
        }
        let k = support.values().sum();
        let info = info_of(model, &support)?;
        Ok(Design { support, k, info })
    }

    pub fn support(&self) -> &BTreeMap<Experiment, usize> {
        &self.support
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn info(&self) -> &InfoMatrix {
        &self.info
    }

    pub fn logdet(&self) -> f64 {
        self.info.logdet()
    }

    pub fn multiplicity(&self, x: &[u32]) -> usize {
        self.support.get(&Experiment(x.to_vec())).copied().unwrap_or(0)
    }

    /// Support points in scan order: decreasing multiplicity, then lexicographic.
    pub fn scan_order(&self) -> Vec<Experiment> {
        let mut pts: Vec<(&Experiment, usize)> = self.support.iter().map(|(x, &n)| (x, n)).collect();
        pts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        pts.into_iter().map(|(x, _)| x.clone()).collect()
    }

    /// Rebuilds the information matrix from the support.
    pub fn revalidate(&mut self, model: &MonomialModel) -> Result<()> {
        self.info = info_of(model, &self.support)?;
        Ok(())
    }

    /// Every support point lies in the instance's experiment space.
    pub fn is_feasible_for(&self, instance: &Instance) -> bool {
        self.k == instance.k && self.support.keys().all(|x| instance.space.contains(x))
    }

    fn apply(&mut self, out: &Experiment, inp: Experiment, info: InfoMatrix) {
        let n = self.support.get_mut(out).expect("removed point is in the support");
        *n -= 1;
        if *n == 0 {
            self.support.remove(out);
        }
        *self.support.entry(inp).or_insert(0) += 1;
        self.info = info;
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DesignFile {
            points: self.support.iter().map(|(x, &n)| DesignEntry { x: x.0.clone(), lambda: n }).collect(),
            k: self.k,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str, model: &MonomialModel) -> Result<Self> {
        let file: DesignFile = serde_json::from_str(s)?;
        let design = Design::from_counts(model, file.points.into_iter().map(|e| (Experiment(e.x), e.lambda)))?;
        if design.k != file.k {
            return Err(Error::InvalidArgument(format!(
                "design multiplicities sum to {} but k = {}",
                design.k, file.k
            )));
        }
        Ok(design)
    }
}

fn info_of(model: &MonomialModel, support: &BTreeMap<Experiment, usize>) -> Result<InfoMatrix> {
    let rows: Vec<(Vec<f64>, f64)> = support.iter().map(|(x, &n)| (model.eval_f64(x), n as f64)).collect();
    InfoMatrix::from_weighted(model.p(), rows.iter().map(|(v, w)| (v.as_slice(), *w)))
}

/// Random rank-`p` starting design of size `k`: rejection-sampled feasible
/// experiments, greedily kept while they raise the rank, then filled to `k`.
pub fn initial_design(instance: &Instance, seed: u64) -> Result<Design> {
    initial_design_with_cap(instance, seed, DEFAULT_SAMPLE_CAP)
}

pub fn initial_design_with_cap(instance: &Instance, seed: u64, cap: usize) -> Result<Design> {
    let mut rng = seeded_rng(seed);
    let picked = sample_spanning(instance, &mut rng, cap, instance.k)?;
    Design::from_counts(&instance.model, picked.into_iter().map(|x| (x, 1)))
}

/// Draws feasible experiments until `total` are kept, the first ones raising
/// the rank to `p`. Fails when `cap` draws are spent first.
pub(crate) fn sample_spanning<R: Rng>(
    instance: &Instance,
    rng: &mut R,
    cap: usize,
    total: usize,
) -> Result<Vec<Experiment>> {
    let p = instance.p();
    let mut span = SpanBasis::new();
    let mut kept = Vec::with_capacity(total);
    let mut draws = 0;
    while span.rank() < p {
        if draws >= cap {
            return Err(Error::RankTooLow { rank: span.rank(), required: p });
        }
        draws += 1;
        let Some(x) = instance.space.sample(rng, 1) else { continue };
        if span.try_add(&instance.model.eval_f64(&x)) {
            kept.push(x);
        }
    }
    while kept.len() < total {
        let Some(x) = instance.space.sample(rng, cap.saturating_sub(draws).max(1)) else {
            return Err(Error::Degenerate(format!("no feasible experiment within {cap} draws")));
        };
        kept.push(x);
    }
    Ok(kept)
}

/// How a move was found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Heuristic,
    Ip,
}

#[derive(Clone, Debug)]
pub struct Exchange {
    pub x_out: Experiment,
    pub x_in: Experiment,
    pub new_logdet: f64,
    pub kind: MoveKind,
    new_info: InfoMatrix,
}

#[derive(Clone, Debug)]
pub enum StepOutcome {
    Improved(Exchange),
    /// Every support point was priced exactly without an improving move.
    LocalOptimum,
    /// No move found, but some exact pricing calls hit their limits.
    Inconclusive {
        unresolved: Vec<Experiment>,
    },
}

#[derive(Clone, Debug)]
pub struct Step {
    pub outcome: StepOutcome,
    pub ip_calls: usize,
    pub heuristic_calls: usize,
}

#[derive(Clone, Debug)]
pub struct LocalSearchOptions {
    pub tol_improve: f64,
    pub max_iterations: usize,
}

impl Default for LocalSearchOptions {
    fn default() -> Self {
        LocalSearchOptions { tol_improve: DEFAULT_TOL_IMPROVE, max_iterations: 1_000_000 }
    }
}

struct Candidate {
    x_out: Experiment,
    removed: InfoMatrix,
    g: nalgebra::DMatrix<f64>,
    target: f64,
    heuristic: PricingResult,
}

/// One first-improvement exchange scan.
pub fn exchange_step(design: &Design, instance: &Instance, pricer: &Pricer, opts: &LocalSearchOptions) -> Result<Step> {
    let p = instance.p();
    if !design.info.is_full_rank() {
        return Err(Error::RankTooLow { rank: design.info.rank(), required: p });
    }
    let old = design.logdet();
    let margin = opts.tol_improve * old.abs().max(1.0);
    let (space, model) = (&instance.space, &instance.model);
    let mut cands = Vec::new();
    let mut step = Step { outcome: StepOutcome::LocalOptimum, ip_calls: 0, heuristic_calls: 0 };

    for x_out in design.scan_order() {
        let v = model.eval_f64(&x_out);
        let removed = rank_one_downdate(&design.info, &v)?;
        let base = if removed.is_full_rank() {
            removed.logdet()
        } else if removed.rank() + 1 == p {
            log_kdet(&removed, p - 1)?
        } else {
            return Err(Error::RankTooLow { rank: removed.rank(), required: p - 1 });
        };
        // new det = exp(base)·(1 + q) when full rank, exp(base)·q otherwise
        let need = (old - base + margin).exp();
        let target = if removed.is_full_rank() { need - 1.0 } else { need };
        let g = pricing_matrix(&removed)?;
        let heuristic = pricer.heuristic(&g, space, model, &x_out)?;
        step.heuristic_calls += 1;
        if heuristic.value > target {
            if let Some(ex) = verify(&removed, &x_out, &heuristic.x, model, old + margin, MoveKind::Heuristic)? {
                step.outcome = StepOutcome::Improved(ex);
                return Ok(step);
            }
        }
        cands.push(Candidate { x_out, removed, g, target, heuristic });
    }

    let mut unresolved = Vec::new();
    for c in cands {
        let r = pricer.exact(&c.g, space, model, Some(&c.heuristic), Some(c.target))?;
        step.ip_calls += 1;
        if r.value > c.target {
            if let Some(ex) = verify(&c.removed, &c.x_out, &r.x, model, old + margin, MoveKind::Ip)? {
                step.outcome = StepOutcome::Improved(ex);
                return Ok(step);
            }
        }
        if r.status == PricingStatus::NodeLimit {
            unresolved.push(c.x_out);
        }
    }
    if !unresolved.is_empty() {
        step.outcome = StepOutcome::Inconclusive { unresolved };
    }
    Ok(step)
}

fn verify(
    removed: &InfoMatrix,
    x_out: &Experiment,
    x_in: &Experiment,
    model: &MonomialModel,
    threshold: f64,
    kind: MoveKind,
) -> Result<Option<Exchange>> {
    let info = rank_one_update(removed, &model.eval_f64(x_in))?;
    if info.is_full_rank() && info.logdet() > threshold {
        Ok(Some(Exchange { x_out: x_out.clone(), x_in: x_in.clone(), new_logdet: info.logdet(), kind, new_info: info }))
    } else {
        Ok(None)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub logdet: f64,
    pub move_kind: MoveKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchReport {
    pub iterations: usize,
    pub heuristic_moves: usize,
    pub ip_moves: usize,
    pub ip_calls: usize,
    pub initial_logdet: f64,
    pub final_logdet: f64,
    /// All exact pricing calls of the final round completed: a proven local optimum.
    pub proved_local_optimum: bool,
    /// The final round had pricing calls that hit their limits.
    pub inconclusive: bool,
    pub trace: Vec<TraceEntry>,
}

impl LocalSearchReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Starting point for [`run`].
#[derive(Clone, Debug)]
pub enum Start {
    Seed(u64),
    Warm(Design),
}

/// Exchanges until no improving move exists.
pub fn run(
    instance: &Instance,
    start: Start,
    pricer: &Pricer,
    opts: &LocalSearchOptions,
) -> Result<(Design, LocalSearchReport)> {
    let mut design = match start {
        Start::Seed(seed) => initial_design(instance, seed)?,
        Start::Warm(d) => {
            if !d.is_feasible_for(instance) {
                return Err(Error::InvalidArgument("warm start is not a feasible design for this instance".into()));
            }
            d
        }
    };
    let mut report = LocalSearchReport {
        iterations: 0,
        heuristic_moves: 0,
        ip_moves: 0,
        ip_calls: 0,
        initial_logdet: design.logdet(),
        final_logdet: design.logdet(),
        proved_local_optimum: false,
        inconclusive: false,
        trace: Vec::new(),
    };
    loop {
        if report.iterations >= opts.max_iterations {
            return Err(Error::IterationCap(opts.max_iterations));
        }
        report.iterations += 1;
        let step = exchange_step(&design, instance, pricer, opts)?;
        report.ip_calls += step.ip_calls;
        match step.outcome {
            StepOutcome::Improved(ex) => {
                let before = design.logdet();
                if ex.new_logdet.partial_cmp(&before) != Some(std::cmp::Ordering::Greater) {
                    return Err(Error::Numerical(format!("non-increasing move {before} -> {}", ex.new_logdet)));
                }
                match ex.kind {
                    MoveKind::Heuristic => report.heuristic_moves += 1,
                    MoveKind::Ip => report.ip_moves += 1,
                }
                report.trace.push(TraceEntry {
                    iteration: report.iterations,
                    logdet: ex.new_logdet,
                    move_kind: ex.kind,
                });
                design.apply(&ex.x_out, ex.x_in, ex.new_info);
                if report.trace.len().is_multiple_of(REVALIDATE_EVERY) {
                    design.revalidate(&instance.model)?;
                }
            }
            StepOutcome::LocalOptimum => {
                report.proved_local_optimum = true;
                break;
            }
            StepOutcome::Inconclusive { .. } => {
                report.inconclusive = true;
                break;
            }
        }
    }
    design.revalidate(&instance.model)?;
    report.final_logdet = design.logdet();
    Ok((design, report))
}

/// `((k-p+1)/k · p/(p+k(ρ-1)))^p`: a ρ-approximate local optimum has
/// `det(S) ≥ e^φ · factor`.
pub fn guarantee_factor(k: usize, p: usize, rho: f64) -> Result<f64> {
    if p == 0 || k < p {
        return Err(Error::InvalidArgument(format!("guarantee factor needs k >= p >= 1, got k={k}, p={p}")));
    }
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("rho must be a finite value >= 1, got {rho}")));
    }
    let (k, pf) = (k as f64, p as f64);
    Ok(((k - pf + 1.0) / k * pf / (pf + k * (rho - 1.0))).powi(p as i32))
}
