use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{ExperimentSpace, MonomialModel};

/// One auxiliary variable `y_T = ∏_{b ∈ T} z_b` over binary variables `T`
/// (`|T| ≥ 2`) with objective coefficient `coef`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxTerm {
    pub bits: Vec<usize>,
    pub coef: f64,
}

/// A linear row `Σ coef·var ≤ rhs` over program variables (bits first, then
/// auxiliaries in `aux` order).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Binary reformulation of `max p(x)ᵀ G p(x)` over `𝒴`.
///
/// Each free factor is written as `x_j = Σ_t 2^t z_{jt}` over
/// `⌈log₂ L⌉` bits; factors pinned by `x₁ = 1` are substituted out. The
/// objective expands to a multilinear polynomial in the bits (using
/// `z² = z`); every product of two or more bits becomes one auxiliary
/// variable with its McCormick envelope
/// `0 ≤ y ≤ z_b (b ∈ T)`, `y ≥ Σ_{b∈T} z_b - |T| + 1`.
#[derive(Clone, Debug)]
pub struct LinearizedProgram {
    pub d: usize,
    pub levels: u32,
    /// Per factor, `(bit index, weight)` pairs; empty for pinned factors.
    pub factor_bits: Vec<Vec<(usize, u32)>>,
    /// Level of pinned factors.
    pub fixed: Vec<Option<u32>>,
    pub n_bits: usize,
    pub constant: f64,
    /// Objective coefficient of each bit.
    pub linear: Vec<f64>,
    pub aux: Vec<AuxTerm>,
    /// Side constraints and level caps over the bits.
    pub rows: Vec<LinearRow>,
}

pub fn build_linearization(
    g: &DMatrix<f64>,
    space: &ExperimentSpace,
    model: &MonomialModel,
) -> Result<LinearizedProgram> {
    if model.order() > 2 {
        return Err(Error::UnsupportedOrder(model.order()));
    }
    let p = model.p();
    if g.nrows() != p || g.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, got: g.nrows() });
    }
    let d = space.d();
    let levels = space.levels();
    let nb = bits_per_factor(levels);

    let mut fixed = vec![None; d];
    if space.fixed_first() {
        fixed[0] = Some(1);
    }
    let mut factor_bits = vec![Vec::new(); d];
    let mut n_bits = 0;
    for j in 0..d {
        if fixed[j].is_none() {
            for t in 0..nb {
                factor_bits[j].push((n_bits, 1u32 << t));
                n_bits += 1;
            }
        }
    }

    // quadratic form in monomials -> polynomial in x (exponent -> coefficient)
    let exps = model.exponents();
    let mut xpoly: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for a in 0..p {
        for b in a..p {
            let c = if a == b { g[(a, a)] } else { g[(a, b)] + g[(b, a)] };
            if c == 0.0 {
                continue;
            }
            let e: Vec<u32> = exps[a].iter().zip(&exps[b]).map(|(u, v)| u + v).collect();
            *xpoly.entry(e).or_insert(0.0) += c;
        }
    }

    // substitute pinned factors, then expand powers of x_j into bits
    let mut bpoly: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (e, c) in xpoly {
        let mut coef = c;
        for j in 0..d {
            if let Some(level) = fixed[j] {
                coef *= (level as f64).powi(e[j] as i32);
                if coef == 0.0 {
                    break;
                }
            }
        }
        if coef == 0.0 {
            continue;
        }
        let mut terms: BTreeMap<Vec<usize>, f64> = BTreeMap::from([(Vec::new(), coef)]);
        for j in 0..d {
            if fixed[j].is_some() {
                continue;
            }
            for _ in 0..e[j] {
                let mut next: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
                for (set, c) in &terms {
                    for &(bit, w) in &factor_bits[j] {
                        let mut s = set.clone();
                        if let Err(pos) = s.binary_search(&bit) {
                            s.insert(pos, bit);
                        }
                        *next.entry(s).or_insert(0.0) += c * w as f64;
                    }
                }
                terms = next;
            }
        }
        for (set, c) in terms {
            *bpoly.entry(set).or_insert(0.0) += c;
        }
    }

    let mut constant = 0.0;
    let mut linear = vec![0.0; n_bits];
    let mut aux = Vec::new();
    for (set, c) in bpoly {
        if c == 0.0 {
            continue;
        }
        match set.len() {
            0 => constant += c,
            1 => linear[set[0]] += c,
            _ => aux.push(AuxTerm { bits: set, coef: c }),
        }
    }

    let mut rows = Vec::new();
    for (row, rhs) in space.integer_constraints() {
        let mut rhs = *rhs as f64;
        let mut terms = Vec::new();
        for j in 0..d {
            if row[j] == 0 {
                continue;
            }
            match fixed[j] {
                Some(level) => rhs -= (row[j] * level as i64) as f64,
                None => terms.extend(factor_bits[j].iter().map(|&(b, w)| (b, (row[j] * w as i64) as f64))),
            }
        }
        rows.push(LinearRow { terms, rhs });
    }
    if !levels.is_power_of_two() {
        for bits in factor_bits.iter().filter(|b| !b.is_empty()) {
            rows.push(LinearRow {
                terms: bits.iter().map(|&(b, w)| (b, w as f64)).collect(),
                rhs: (levels - 1) as f64,
            });
        }
    }

    Ok(LinearizedProgram { d, levels, factor_bits, fixed, n_bits, constant, linear, aux, rows })
}

fn bits_per_factor(levels: u32) -> usize {
    (u32::BITS - (levels - 1).leading_zeros()) as usize
}

impl LinearizedProgram {
    pub fn n_vars(&self) -> usize {
        self.n_bits + self.aux.len()
    }

    /// Experiment encoded by a bit assignment.
    pub fn decode(&self, bits: &[bool]) -> Vec<u32> {
        (0..self.d)
            .map(|j| match self.fixed[j] {
                Some(level) => level,
                None => self.factor_bits[j].iter().filter(|&&(b, _)| bits[b]).map(|&(_, w)| w).sum(),
            })
            .collect()
    }

    /// Bit assignment of an experiment; `None` if it contradicts a pinned factor.
    pub fn encode(&self, x: &[u32]) -> Option<Vec<bool>> {
        let mut bits = vec![false; self.n_bits];
        for ((&xj, fixed), factor_bits) in x.iter().zip(&self.fixed).zip(&self.factor_bits).take(self.d) {
            match fixed {
                Some(level) if *level != xj => return None,
                Some(_) => {}
                None => {
                    for &(b, w) in factor_bits {
                        bits[b] = xj & w != 0;
                    }
                }
            }
        }
        Some(bits)
    }

    /// Full variable vector (bits then forced auxiliaries) for a bit assignment.
    pub fn lift(&self, bits: &[bool]) -> Vec<f64> {
        let mut v: Vec<f64> = bits.iter().map(|&b| b as u8 as f64).collect();
        v.extend(self.aux.iter().map(|t| t.bits.iter().all(|&b| bits[b]) as u8 as f64));
        v
    }

    /// Linear objective at a full variable vector.
    pub fn linear_objective(&self, vars: &[f64]) -> f64 {
        let mut total = self.constant;
        total += self.linear.iter().zip(vars).map(|(c, v)| c * v).sum::<f64>();
        total += self.aux.iter().enumerate().map(|(i, t)| t.coef * vars[self.n_bits + i]).sum::<f64>();
        total
    }

    /// Whether a full variable vector satisfies the side rows and every
    /// McCormick inequality.
    pub fn is_feasible(&self, vars: &[f64]) -> bool {
        let tol = 1e-9;
        if vars.iter().any(|&v| !(-tol..=1.0 + tol).contains(&v)) {
            return false;
        }
        self.all_rows().iter().all(|r| r.terms.iter().map(|&(i, c)| c * vars[i]).sum::<f64>() <= r.rhs + tol)
    }

    /// McCormick envelope rows for every auxiliary (bounds `0 ≤ y` implied).
    pub fn envelope_rows(&self) -> Vec<LinearRow> {
        let mut rows = Vec::new();
        for (i, t) in self.aux.iter().enumerate() {
            let y = self.n_bits + i;
            for &b in &t.bits {
                rows.push(LinearRow { terms: vec![(y, 1.0), (b, -1.0)], rhs: 0.0 });
            }
            let mut terms: Vec<(usize, f64)> = t.bits.iter().map(|&b| (b, 1.0)).collect();
            terms.push((y, -1.0));
            rows.push(LinearRow { terms, rhs: t.bits.len() as f64 - 1.0 });
        }
        rows
    }

    /// Side rows followed by envelope rows.
    pub fn all_rows(&self) -> Vec<LinearRow> {
        let mut rows = self.rows.clone();
        rows.extend(self.envelope_rows());
        rows
    }
}
