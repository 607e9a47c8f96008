//! Experiment spaces, monomial models, design points and the benchmark
//! instance generators.
//!
//! An experiment is an integer vector `x ∈ {0, …, L-1}^d`. The allowable set is
//! the box intersected with linear side constraints `A x ≤ b` (exact rational
//! data) and, optionally, `x₁ = 1`. A monomial model maps an experiment to its
//! design point `p(x) = (m_1(x), …, m_p(x))`.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Rational64;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the random generator behind every seeded routine.
pub const RNG_ID: &str = "chacha8/rand0.8";

/// Seeded generator used by instance generators and samplers.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A single experiment (factor levels).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Experiment(pub Vec<u32>);

impl Experiment {
    pub fn new(levels: Vec<u32>) -> Self {
        Experiment(levels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for Experiment {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for Experiment {
    fn from(v: Vec<u32>) -> Self {
        Experiment(v)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// One linear side constraint `row · x ≤ rhs` with exact rational data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub row: Vec<Rational64>,
    pub rhs: Rational64,
}

impl Constraint {
    pub fn new(row: Vec<Rational64>, rhs: Rational64) -> Self {
        Constraint { row, rhs }
    }

    pub fn from_integers(row: &[i64], rhs: i64) -> Self {
        Constraint {
            row: row.iter().map(|&a| Rational64::from_integer(a)).collect(),
            rhs: Rational64::from_integer(rhs),
        }
    }

    /// Integer form `(row', rhs')` with the same solution set over integer `x`.
    fn scaled(&self) -> (Vec<i64>, i64) {
        let mut l = *self.rhs.denom();
        for a in &self.row {
            l = lcm(l, *a.denom());
        }
        let row = self.row.iter().map(|a| (a * l).to_integer()).collect();
        (row, (self.rhs * l).to_integer())
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i64, b: i64) -> i64 {
    (a / gcd(a, b)) * b
}

/// Box `{0,…,L-1}^d` with side constraints and the optional `x₁ = 1` flag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentSpace {
    d: usize,
    levels: u32,
    constraints: Vec<Constraint>,
    fixed_first: bool,
    scaled: Vec<(Vec<i64>, i64)>,
}

impl ExperimentSpace {
    pub fn new(d: usize, levels: u32, constraints: Vec<Constraint>, fixed_first: bool) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("factor count must be positive".into()));
        }
        if levels < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 levels, got {levels}")));
        }
        for c in &constraints {
            if c.row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: c.row.len() });
            }
        }
        let scaled = constraints.iter().map(Constraint::scaled).collect();
        Ok(ExperimentSpace { d, levels, constraints, fixed_first, scaled })
    }

    /// The plain box with no side constraints.
    pub fn unconstrained(d: usize, levels: u32, fixed_first: bool) -> Result<Self> {
        Self::new(d, levels, Vec::new(), fixed_first)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn fixed_first(&self) -> bool {
        self.fixed_first
    }

    /// Integer-scaled constraint rows, same solution set as the rational ones.
    pub fn integer_constraints(&self) -> &[(Vec<i64>, i64)] {
        &self.scaled
    }

    pub fn contains(&self, x: &[u32]) -> bool {
        if x.len() != self.d || x.iter().any(|&v| v >= self.levels) {
            return false;
        }
        if self.fixed_first && x[0] != 1 {
            return false;
        }
        self.scaled.iter().all(|(row, rhs)| {
            let lhs: i64 = row.iter().zip(x).map(|(a, &v)| a * v as i64).sum();
            lhs <= *rhs
        })
    }

    /// Number of box points the enumerator visits (`x₁` pinned when fixed).
    pub fn box_size(&self) -> u128 {
        let free = if self.fixed_first { self.d - 1 } else { self.d };
        (self.levels as u128).saturating_pow(free as u32)
    }

    /// Box points in lexicographic order (last coordinate fastest).
    pub fn box_points(&self) -> BoxPoints<'_> {
        let mut start = vec![0u32; self.d];
        if self.fixed_first {
            start[0] = 1;
        }
        BoxPoints { space: self, next: Some(start) }
    }

    /// Feasible experiments in lexicographic order.
    pub fn feasible_points(&self) -> impl Iterator<Item = Experiment> + '_ {
        self.box_points().filter(|x| self.contains(x)).map(Experiment)
    }

    /// Draws a uniformly random box point (with `x₁ = 1` when fixed) and
    /// retries until it is feasible, at most `max_tries` draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_tries: usize) -> Option<Experiment> {
        for _ in 0..max_tries {
            let x: Vec<u32> = (0..self.d)
                .map(|j| if j == 0 && self.fixed_first { 1 } else { rng.gen_range(0..self.levels) })
                .collect();
            if self.contains(&x) {
                return Some(Experiment(x));
            }
        }
        None
    }
}

/// Lexicographic odometer over the experiment box.
pub struct BoxPoints<'a> {
    space: &'a ExperimentSpace,
    next: Option<Vec<u32>>,
}

impl Iterator for BoxPoints<'_> {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let lo = usize::from(self.space.fixed_first);
        let mut j = self.space.d;
        loop {
            if j == lo {
                break;
            }
            j -= 1;
            if succ[j] + 1 < self.space.levels {
                succ[j] += 1;
                self.next = Some(succ);
                break;
            }
            succ[j] = 0;
        }
        Some(current)
    }
}

/// Ordered list of distinct monomials over `d` factors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialModel {
    d: usize,
    exponents: Vec<Vec<u32>>,
    order: u32,
}

impl MonomialModel {
    pub fn new(d: usize, exponents: Vec<Vec<u32>>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::InvalidArgument("a model needs at least one monomial".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &exponents {
            if e.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: e.len() });
            }
            if !seen.insert(e.clone()) {
                return Err(Error::InvalidArgument(format!("duplicate monomial {e:?}")));
            }
        }
        let order = exponents.iter().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0);
        Ok(MonomialModel { d, exponents, order })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of monomials `p`.
    pub fn p(&self) -> usize {
        self.exponents.len()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Drops monomials that coincide with an earlier one once `x₁ = 1`.
    ///
    /// With the first factor pinned, `x₁^e = 1`, so e.g. the degree-one `x₁`
    /// duplicates the constant and would make every design singular.
    pub fn collapse_fixed_first(&self) -> MonomialModel {
        let mut seen = BTreeSet::new();
        let mut kept = Vec::new();
        for e in &self.exponents {
            let mut reduced = e.clone();
            reduced[0] = 0;
            if seen.insert(reduced) {
                kept.push(e.clone());
            }
        }
        MonomialModel::new(self.d, kept).expect("subset of a valid model")
    }

    /// Evaluates `p(x)` into a float buffer of length `p`.
    pub fn eval_into(&self, x: &[u32], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            let mut v = 1.0;
            for (&xj, &ej) in x.iter().zip(e) {
                if ej > 0 {
                    v *= (xj as f64).powi(ej as i32);
                }
            }
            *o = v;
        }
    }

    pub fn eval_f64(&self, x: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Integer design point `p(x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DesignPoint(pub Vec<i64>);

impl DesignPoint {
    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }
}

/// Evaluates the design point of `x` under `model`.
pub fn eval_design_point(model: &MonomialModel, x: &[u32]) -> Result<DesignPoint> {
    if x.len() != model.d {
        return Err(Error::DimensionMismatch { expected: model.d, got: x.len() });
    }
    let values =
        model.exponents.iter().map(|e| e.iter().zip(x).map(|(&ej, &xj)| (xj as i64).pow(ej)).product()).collect();
    Ok(DesignPoint(values))
}

fn unit(d: usize, j: usize) -> Vec<u32> {
    let mut e = vec![0; d];
    e[j] = 1;
    e
}

/// `{1, x₁, …, x_d}` in that order.
pub fn build_full_first_order(d: usize) -> Result<MonomialModel> {
    if d < 1 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let mut exps = vec![vec![0; d]];
    exps.extend((0..d).map(|j| unit(d, j)));
    MonomialModel::new(d, exps)
}

/// Constant, all degree-one monomials, then `x_l x_j` for the pairs
/// `l < j` drawn from factors `2..=⌊d/2⌋+1` (1-based), lexicographically.
pub fn build_second_order_pairs(d: usize) -> Result<MonomialModel> {
    if d < 4 {
        return Err(Error::InvalidArgument(format!("second-order pair model needs d >= 4, got {d}")));
    }
    let mut exps = vec![vec![0; d]];
    exps.extend((0..d).map(|j| unit(d, j)));
    let hi = d / 2; // 0-based indices 1..=hi
    for l in 1..=hi {
        for j in (l + 1)..=hi {
            let mut e = vec![0; d];
            e[l] = 1;
            e[j] = 1;
            exps.push(e);
        }
    }
    MonomialModel::new(d, exps)
}

/// A complete problem: space, model and budget.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub space: ExperimentSpace,
    pub model: MonomialModel,
    pub k: usize,
    pub seed: Option<u64>,
    pub generator: String,
}

impl Instance {
    pub fn new(space: ExperimentSpace, model: MonomialModel, k: usize) -> Result<Self> {
        Self::with_provenance(space, model, k, None, "custom".into())
    }

    pub fn with_provenance(
        space: ExperimentSpace,
        model: MonomialModel,
        k: usize,
        seed: Option<u64>,
        generator: String,
    ) -> Result<Self> {
        if space.d() != model.d() {
            return Err(Error::DimensionMismatch { expected: space.d(), got: model.d() });
        }
        if k < model.p() {
            return Err(Error::Degenerate(format!("budget k={k} is below p={}", model.p())));
        }
        Ok(Instance { space, model, k, seed, generator })
    }

    pub fn p(&self) -> usize {
        self.model.p()
    }

    pub fn d(&self) -> usize {
        self.space.d()
    }

    /// Dimension of the span of `{p(x) : x ∈ 𝒴}`, by enumeration; designs
    /// of full rank exist iff it equals `p`.
    pub fn feasible_span_rank(&self, cap: u128) -> Result<usize> {
        let needed = self.space.box_size();
        if needed > cap {
            return Err(Error::CapExceeded { needed, cap });
        }
        let mut span = crate::linalg::SpanBasis::new();
        for x in self.space.feasible_points() {
            span.try_add(&self.model.eval_f64(&x));
            if span.rank() == self.p() {
                break;
            }
        }
        Ok(span.rank())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

/// Default budget used by the generators and suites.
pub fn default_budget(p: usize) -> usize {
    2 * p
}

/// First-order, two levels, `x₁ = 1`, `1ᵀx ≤ ⌊d/3⌋`.
pub fn generate_cardinality_instance(d: usize, k: Option<usize>) -> Result<Instance> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!("cardinality instances need d >= 3, got {d}")));
    }
    generate_cardinality_with_bound(d, (d / 3) as i64, k)
}

/// Cardinality instance with an explicit bound `r` instead of `⌊d/3⌋`.
pub fn generate_cardinality_with_bound(d: usize, r: i64, k: Option<usize>) -> Result<Instance> {
    let space = ExperimentSpace::new(d, 2, vec![Constraint::from_integers(&vec![1; d], r)], true)?;
    let model = build_full_first_order(d)?.collapse_fixed_first();
    let k = k.unwrap_or_else(|| default_budget(model.p()));
    Instance::with_provenance(space, model, k, None, "cardinality".into())
}

/// The two knapsack rows `(a_i, b_i)` shared by the knapsack generators.
///
/// Per row: `a_{i1} = 0`; among the remaining `d-1` positions a uniformly
/// random subset of size `⌈0.8(d-1)⌉` gets values from `{0..5}`, the rest
/// from `{20..30}`; `b_i = ½ Σ_j a_ij`.
pub fn knapsack_constraints(d: usize, seed: u64) -> Vec<Constraint> {
    let mut rng = seeded_rng(seed);
    let rest = d - 1;
    let n_small = (8 * rest).div_ceil(10);
    (0..2)
        .map(|_| {
            let mut positions: Vec<usize> = (1..d).collect();
            positions.shuffle(&mut rng);
            let mut small = vec![false; d];
            for &j in &positions[..n_small] {
                small[j] = true;
            }
            let mut row = vec![0i64; d];
            for j in 1..d {
                row[j] = if small[j] { rng.gen_range(0..=5) } else { rng.gen_range(20..=30) };
            }
            let total: i64 = row.iter().sum();
            Constraint::new(row.into_iter().map(Rational64::from_integer).collect(), Rational64::new(total, 2))
        })
        .collect()
}

/// First-order, two levels, `x₁ = 1`, two random knapsack rows.
pub fn generate_knapsack_instance(d: usize, k: Option<usize>, seed: u64) -> Result<Instance> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("knapsack instances need d >= 2, got {d}")));
    }
    let space = ExperimentSpace::new(d, 2, knapsack_constraints(d, seed), true)?;
    let model = build_full_first_order(d)?.collapse_fixed_first();
    let k = k.unwrap_or_else(|| default_budget(model.p()));
    Instance::with_provenance(space, model, k, Some(seed), "knapsack".into())
}

/// Partial second-order model with the knapsack rows of
/// [`generate_knapsack_instance`].
pub fn generate_second_order_knapsack_instance(d: usize, k: Option<usize>, seed: u64) -> Result<Instance> {
    let model = build_second_order_pairs(d)?.collapse_fixed_first();
    let space = ExperimentSpace::new(d, 2, knapsack_constraints(d, seed), true)?;
    let k = k.unwrap_or_else(|| default_budget(model.p()));
    Instance::with_provenance(space, model, k, Some(seed), "second_order".into())
}

/// `{0,1}^d` (optionally with `x₁ = 1`) and the full first-order model
/// (collapsed when `x₁` is fixed).
pub fn unconstrained_first_order_instance(d: usize, fixed_first: bool, k: usize) -> Result<Instance> {
    let space = ExperimentSpace::unconstrained(d, 2, fixed_first)?;
    let mut model = build_full_first_order(d)?;
    if fixed_first {
        model = model.collapse_fixed_first();
    }
    Instance::with_provenance(space, model, k, None, "unconstrained".into())
}

// ---------------------------------------------------------------------------
// JSON instance format

/// Rational encoded as a JSON number when integral, `[num, den]` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JsonRational(pub Rational64);

impl Serialize for JsonRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            s.serialize_i64(self.0.to_integer())
        } else {
            [*self.0.numer(), *self.0.denom()].serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for JsonRational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Pair([i64; 2]),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(JsonRational(Rational64::from_integer(v))),
            Raw::Pair([n, den]) => {
                if den.is_zero() {
                    return Err(serde::de::Error::custom("zero denominator"));
                }
                Ok(JsonRational(Rational64::new(n, den)))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    exponents: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct ConstraintFile {
    row: Vec<JsonRational>,
    rhs: JsonRational,
}

/// On-disk layout of an [`Instance`].
#[derive(Serialize, Deserialize)]
pub struct InstanceFile {
    d: usize,
    #[serde(rename = "L")]
    levels: u32,
    k: usize,
    model: ModelFile,
    constraints: Vec<ConstraintFile>,
    fixed_first: bool,
    seed: Option<u64>,
    generator: String,
    #[serde(default = "default_rng_id")]
    rng: String,
}

fn default_rng_id() -> String {
    RNG_ID.to_string()
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            d: inst.space.d(),
            levels: inst.space.levels(),
            k: inst.k,
            model: ModelFile { exponents: inst.model.exponents().to_vec() },
            constraints: inst
                .space
                .constraints()
                .iter()
                .map(|c| ConstraintFile {
                    row: c.row.iter().copied().map(JsonRational).collect(),
                    rhs: JsonRational(c.rhs),
                })
                .collect(),
            fixed_first: inst.space.fixed_first(),
            seed: inst.seed,
            generator: inst.generator.clone(),
            rng: RNG_ID.to_string(),
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        let constraints = f
            .constraints
            .into_iter()
            .map(|c| Constraint::new(c.row.into_iter().map(|r| r.0).collect(), c.rhs.0))
            .collect();
        let space = ExperimentSpace::new(f.d, f.levels, constraints, f.fixed_first)?;
        let model = MonomialModel::new(f.d, f.model.exponents)?;
        Instance::with_provenance(space, model, f.k, f.seed, f.generator)
    }
}
