//! Continuous relaxation of the design problem and its dual.
//!
//! The relaxation drops integrality of the multiplicities:
//! `max ln det Σ λ_v vvᵀ` subject to `Σλ = k`, `λ ≥ 0`. For a restricted
//! point set `𝒫′` the optimal weights give the dual pair `Λ = M⁻¹`,
//! `ν = max_{v∈𝒫′} vᵀΛv`, and any `α ≥ max_{v∈𝒫} vᵀΛv` turns it into the
//! upper bound `kα − ln det Λ − p` on the relaxation, hence on the integer
//! optimum. [`column_generation`] grows `𝒫′` by pricing until that bound
//! meets the master objective.

mod colgen;
mod master;
mod sparsify;

pub use colgen::{column_generation, CgMode, CgParams, CgResult, CgTraceEntry};
pub use master::{
    solve_restricted_master, solve_restricted_master_from, MasterMethod, MasterOptions, DEFAULT_MASTER_ITERATIONS,
    DEFAULT_TOL_MASTER,
};
pub use sparsify::{sparsify, support_bound};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::InfoMatrix;
use crate::model::{DesignPoint, Experiment, Instance};
use crate::pricing::{Pricer, PricingResult};

/// Nonnegative weights over stored design points, summing to `k`.
#[derive(Clone, Debug)]
pub struct ContinuousDesign {
    points: Vec<DesignPoint>,
    vectors: Vec<Vec<f64>>,
    weights: Vec<f64>,
    k: f64,
    moment: InfoMatrix,
}

impl ContinuousDesign {
    pub fn new(points: Vec<DesignPoint>, weights: Vec<f64>, k: f64) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: weights.len() });
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - k).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, expected {k}")));
        }
        let p = points[0].0.len();
        let vectors: Vec<Vec<f64>> = points.iter().map(DesignPoint::to_f64).collect();
        if vectors.iter().any(|v| v.len() != p) {
            return Err(Error::InvalidArgument("design points have mixed lengths".into()));
        }
        let moment = InfoMatrix::from_weighted(p, vectors.iter().zip(&weights).map(|(v, &w)| (v.as_slice(), w)))?;
        Ok(ContinuousDesign { points, vectors, weights, k, moment })
    }

    pub fn points(&self) -> &[DesignPoint] {
        &self.points
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn p(&self) -> usize {
        self.moment.p()
    }

    pub fn moment(&self) -> &InfoMatrix {
        &self.moment
    }

    /// `ln det Σ λ_v vvᵀ`.
    pub fn objective(&self) -> f64 {
        self.moment.logdet()
    }

    /// Indices with positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }
}

/// Which point set a certificate's `ν` bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertScope {
    /// `vᵀΛv ≤ ν` on the stored points only.
    Restricted,
    /// `vᵀΛv ≤ ν` on every allowable experiment (proved by exact pricing).
    Full,
}

/// Dual solution `(Λ, ν)` with objective `kν − ln det Λ − p`.
#[derive(Clone, Debug, Serialize)]
pub struct DualCertificate {
    #[serde(serialize_with = "ser_matrix")]
    pub lambda: DMatrix<f64>,
    pub nu: f64,
    pub logdet_lambda: f64,
    pub objective: f64,
    pub k: f64,
    pub scope: CertScope,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

impl DualCertificate {
    pub fn p(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `Λ = M⁻¹`, `ν = max_{v∈𝒫′} vᵀΛv`, feasible for the restricted dual.
pub fn dual_from_primal(cd: &ContinuousDesign) -> Result<DualCertificate> {
    let m = cd.moment();
    let lambda = m.inverse().ok_or(Error::RankTooLow { rank: m.rank(), required: m.p() })?;
    let nu = cd.vectors().iter().map(|v| m.inv_quad(v).unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let logdet_lambda = -m.logdet();
    let p = m.p() as f64;
    Ok(DualCertificate {
        lambda,
        nu,
        logdet_lambda,
        objective: cd.k() * nu - logdet_lambda - p,
        k: cd.k(),
        scope: CertScope::Restricted,
    })
}

/// Outcome of pricing a certificate over all of `𝒴`.
#[derive(Clone, Debug)]
pub struct DualCheck {
    /// Point attaining `alpha`.
    pub point: Experiment,
    /// `max_{x∈𝒴} p(x)ᵀΛp(x)` when `exact`, otherwise a lower bound.
    pub alpha: f64,
    pub exact: bool,
}

/// Prices `G = Λ` over the instance's experiment space, starting the
/// heuristic at `start` (any feasible point).
pub fn check_dual_feasibility(
    cert: &DualCertificate,
    instance: &Instance,
    pricer: &Pricer,
    start: &Experiment,
) -> Result<DualCheck> {
    let h = pricer.heuristic(&cert.lambda, &instance.space, &instance.model, start)?;
    let r = pricer.exact(&cert.lambda, &instance.space, &instance.model, Some(&h), None)?;
    Ok(check_from(r))
}

pub(crate) fn check_from(r: PricingResult) -> DualCheck {
    DualCheck { point: r.x, alpha: r.value, exact: r.exact }
}

/// `kα − ln det Λ − p` with `α` from an exact pricing solve (and at least
/// `ν`): an upper bound on the relaxation and on the integer optimum.
pub fn upper_bound_from_alpha(cert: &DualCertificate, check: &DualCheck) -> Result<f64> {
    if !check.exact {
        return Err(Error::InvalidBound(format!(
            "alpha = {} is not proven optimal; the bound would be invalid",
            check.alpha
        )));
    }
    let alpha = check.alpha.max(cert.nu);
    Ok(cert.k * alpha - cert.logdet_lambda - cert.p() as f64)
}

/// The certificate with `ν` raised to the exact pricing value, valid for
/// the unrestricted dual.
pub fn full_certificate(cert: &DualCertificate, check: &DualCheck) -> Result<DualCertificate> {
    let objective = upper_bound_from_alpha(cert, check)?;
    Ok(DualCertificate { nu: check.alpha.max(cert.nu), objective, scope: CertScope::Full, ..cert.clone() })
}
