use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::ContinuousDesign;
use crate::error::{Error, Result};
use crate::linalg::{InfoMatrix, SpanBasis};
use crate::model::DesignPoint;

/// Default master tolerance on `max_v vᵀM⁻¹v ≤ (1 + tol)·p/k`.
pub const DEFAULT_TOL_MASTER: f64 = 1e-9;
pub const DEFAULT_MASTER_ITERATIONS: usize = 100_000;

const REFRESH_EVERY: usize = 128;
const COLD_SWEEPS: usize = 10;
/// Newton polishing starts once the optimality gap is below this.
const POLISH_BELOW: f64 = 1e-2;
const POLISH_STEPS: usize = 30;

/// Iteration used for the restricted master.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MasterMethod {
    /// `λ_v ← λ_v · k·vᵀM⁻¹v / p`, one full sweep per iteration.
    Multiplicative,
    /// Multiplicative sweeps on a cold start, then single-coordinate
    /// toward/away steps with exact line search, with Newton steps on the
    /// current support once close. Same fixed point.
    Hybrid,
}

#[derive(Clone, Debug, Serialize)]
pub struct MasterOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub method: MasterMethod,
}

impl Default for MasterOptions {
    fn default() -> Self {
        MasterOptions {
            tol: DEFAULT_TOL_MASTER,
            max_iterations: DEFAULT_MASTER_ITERATIONS,
            method: MasterMethod::Hybrid,
        }
    }
}

/// Maximizes `ln det Σ λ_v vvᵀ` over `Σλ = k, λ ≥ 0` from uniform weights.
pub fn solve_restricted_master(points: &[DesignPoint], k: f64, opts: &MasterOptions) -> Result<ContinuousDesign> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidArgument("restricted master needs at least one point".into()));
    }
    solve_master_impl(points, k, vec![1.0 / n as f64; n], true, opts)
}

/// As [`solve_restricted_master`], starting from `weights` (summing to `k`).
/// Zero weights are allowed as long as the positive ones span.
pub fn solve_restricted_master_from(
    points: &[DesignPoint],
    k: f64,
    weights: &[f64],
    opts: &MasterOptions,
) -> Result<ContinuousDesign> {
    if weights.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: weights.len() });
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || !(total > 0.0) {
        return Err(Error::InvalidArgument("warm-start weights must be nonnegative with a positive sum".into()));
    }
    let u = weights.iter().map(|w| w / total).collect();
    solve_master_impl(points, k, u, false, opts)
}

fn solve_master_impl(
    points: &[DesignPoint],
    k: f64,
    mut u: Vec<f64>,
    cold: bool,
    opts: &MasterOptions,
) -> Result<ContinuousDesign> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("k must be positive, got {k}")));
    }
    let p = points[0].0.len();
    let vs: Vec<DVector<f64>> = points.iter().map(|v| DVector::from_vec(v.to_f64())).collect();
    if vs.iter().any(|v| v.len() != p) {
        return Err(Error::InvalidArgument("design points have mixed lengths".into()));
    }
    let mut span = SpanBasis::new();
    for (v, &ui) in vs.iter().zip(&u) {
        if ui > 0.0 {
            span.try_add(v.as_slice());
        }
    }
    if span.rank() < p {
        return Err(Error::RankTooLow { rank: span.rank(), required: p });
    }
    let mut state = State::new(&vs, u.clone())?;
    let sweeps = match opts.method {
        MasterMethod::Multiplicative => opts.max_iterations,
        MasterMethod::Hybrid if cold => COLD_SWEEPS.min(opts.max_iterations),
        MasterMethod::Hybrid => 0,
    };
    let mut iters = 0;
    while iters < sweeps {
        if state.max_excess() <= opts.tol {
            break;
        }
        for (ui, w) in state.u.iter_mut().zip(&state.omega) {
            *ui *= w / p as f64;
        }
        u.clone_from(&state.u);
        state = State::new(&vs, u.clone())?;
        iters += 1;
    }
    if opts.method == MasterMethod::Hybrid {
        let mut since_refresh = 0;
        loop {
            if state.max_excess() <= opts.tol {
                if since_refresh == 0 {
                    break;
                }
                state = State::new(&vs, state.u.clone())?;
                since_refresh = 0;
                continue;
            }
            if iters >= opts.max_iterations {
                break;
            }
            state.step(&vs)?;
            iters += 1;
            since_refresh += 1;
            if since_refresh >= REFRESH_EVERY {
                state = State::new(&vs, state.u.clone())?;
                since_refresh = 0;
                if state.max_excess() < POLISH_BELOW {
                    let budget = POLISH_STEPS.min(opts.max_iterations - iters);
                    iters += state.polish(&vs, budget, opts.tol)?;
                }
            }
        }
    }
    if state.max_excess() > opts.tol {
        return Err(Error::IterationCap(opts.max_iterations));
    }
    let weights = state.u.iter().map(|&x| x * k).collect();
    ContinuousDesign::new(points.to_vec(), weights, k)
}

/// Normalized weights `u` (sum 1) with `M(u)⁻¹` and variances `ω_v = vᵀM(u)⁻¹v`.
struct State {
    u: Vec<f64>,
    minv: DMatrix<f64>,
    omega: Vec<f64>,
    p: f64,
    logdet: f64,
}

impl State {
    fn new(vs: &[DVector<f64>], mut u: Vec<f64>) -> Result<Self> {
        let total: f64 = u.iter().sum();
        u.iter_mut().for_each(|x| *x /= total);
        let p = vs[0].len();
        let m = InfoMatrix::from_weighted(p, vs.iter().zip(&u).map(|(v, &w)| (v.as_slice(), w)))?;
        let minv = m.inverse().ok_or(Error::RankTooLow { rank: m.rank(), required: p })?;
        let omega = vs.iter().map(|v| v.dot(&(&minv * v))).collect();
        Ok(State { u, minv, omega, p: p as f64, logdet: m.logdet() })
    }

    /// Newton steps on `ln det M(u)` restricted to the current support and
    /// `Σu = 1`. A weight driven to zero leaves the support; points outside
    /// it are left to the toward steps. Returns the number of steps taken.
    fn polish(&mut self, vs: &[DVector<f64>], budget: usize, tol: f64) -> Result<usize> {
        for step in 0..budget {
            if self.max_excess() <= tol {
                return Ok(step);
            }
            let support: Vec<usize> = (0..self.u.len()).filter(|&i| self.u[i] > 0.0).collect();
            let n = support.len();
            // the KKT solve is cubic in the support size
            if n > (self.p as usize) * (self.p as usize + 1) {
                return Ok(step);
            }
            let a: Vec<DVector<f64>> = support.iter().map(|&i| &self.minv * &vs[i]).collect();
            // maximize gᵀΔ − ½ΔᵀQΔ with Q = (VM⁻¹Vᵀ)∘², subject to 1ᵀΔ = 0
            let mut kkt = DMatrix::zeros(n + 1, n + 1);
            let mut rhs = DVector::zeros(n + 1);
            for (r, &i) in support.iter().enumerate() {
                for c in r..n {
                    let q = vs[support[c]].dot(&a[r]).powi(2);
                    kkt[(r, c)] = q;
                    kkt[(c, r)] = q;
                }
                kkt[(r, n)] = 1.0;
                kkt[(n, r)] = 1.0;
                rhs[r] = self.omega[i];
            }
            let sol = kkt
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::Numerical(format!("master Newton step: {e}")))?;
            let delta = sol.rows(0, n);
            let decrement: f64 = support.iter().zip(delta.iter()).map(|(&i, d)| self.omega[i] * d).sum();
            if !(decrement > 1e-15) {
                return Ok(step);
            }
            let (mut t, mut hit) = (1.0, None);
            for (r, &i) in support.iter().enumerate() {
                if delta[r] < 0.0 && -self.u[i] / delta[r] < t {
                    t = -self.u[i] / delta[r];
                    hit = Some(i);
                }
            }
            let mut accepted = false;
            for _ in 0..40 {
                let mut u = self.u.clone();
                for (r, &i) in support.iter().enumerate() {
                    u[i] = (u[i] + t * delta[r]).max(0.0);
                }
                if let Some(h) = hit {
                    u[h] = 0.0;
                }
                if let Ok(next) = State::new(vs, u) {
                    if next.logdet > self.logdet {
                        *self = next;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
                hit = None;
            }
            if !accepted {
                return Ok(step + 1);
            }
        }
        Ok(budget)
    }

    /// `max_v ω_v / p - 1`.
    fn max_excess(&self) -> f64 {
        self.omega.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) / self.p - 1.0
    }

    /// One toward or away step with exact line search on `ln det`.
    fn step(&mut self, vs: &[DVector<f64>]) -> Result<()> {
        let p = self.p;
        let (j, wmax) = argmax(self.omega.iter().copied().enumerate());
        let away = argmin(self.omega.iter().copied().enumerate().filter(|&(i, _)| self.u[i] > 0.0));
        let plus = wmax / p - 1.0;
        if let Some((i, wmin)) = away {
            let minus = 1.0 - wmin / p;
            let ui = self.u[i];
            if minus > plus && ui < 1.0 {
                let cap = ui / (1.0 - ui);
                let tau = if wmin > 1.0 { ((p - wmin) / (p * (wmin - 1.0))).min(cap) } else { cap };
                // removing an essential point would make M singular
                if 1.0 + tau * (1.0 - wmin) > 1e-10 {
                    self.update(vs, i, -tau);
                    if tau == cap {
                        self.u[i] = 0.0;
                    }
                    return Ok(());
                }
            }
        }
        let tau = (wmax - p) / (p * (wmax - 1.0));
        self.update(vs, j, tau);
        Ok(())
    }

    /// `u ← (1-τ)u + τ e_j` with the matching rank-one update of `M⁻¹` and `ω`.
    fn update(&mut self, vs: &[DVector<f64>], j: usize, tau: f64) {
        let a = &self.minv * &vs[j];
        let denom = 1.0 - tau + tau * self.omega[j];
        let scale = 1.0 / (1.0 - tau);
        let c = tau / denom;
        for (w, v) in self.omega.iter_mut().zip(vs) {
            let s = v.dot(&a);
            *w = (*w - c * s * s) * scale;
        }
        self.minv.ger(-c, &a, &a, 1.0);
        self.minv *= scale;
        for x in self.u.iter_mut() {
            *x *= 1.0 - tau;
        }
        self.u[j] += tau;
        self.u[j] = self.u[j].max(0.0);
    }
}

fn argmax(it: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    it.fold((0, f64::NEG_INFINITY), |best, (i, w)| if w > best.1 { (i, w) } else { best })
}

fn argmin(it: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    it.fold(None, |best: Option<(usize, f64)>, (i, w)| match best {
        Some((_, bw)) if bw <= w => best,
        _ => Some((i, w)),
    })
}

/// Fedorov–Wynn step: the weight `τ·k` that maximizes `ln det` when moving
/// `(1-τ)λ + τ k e_v`, given `ω = k·vᵀM⁻¹v`; zero when `v` does not improve.
pub(crate) fn line_search_step(omega: f64, p: usize) -> f64 {
    let p = p as f64;
    if omega <= p {
        0.0
    } else {
        (omega - p) / (p * (omega - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::seeded_rng;
    use rand::Rng;

    fn logdet_of(vs: &[Vec<f64>], w: &[f64]) -> f64 {
        let p = vs[0].len();
        InfoMatrix::from_weighted(p, vs.iter().zip(w).map(|(v, &x)| (v.as_slice(), x))).unwrap().logdet()
    }

    /// Projected gradient ascent on the scaled simplex, Armijo backtracking.
    fn projected_gradient(vs: &[Vec<f64>], k: f64, iters: usize) -> f64 {
        let n = vs.len();
        let p = vs[0].len();
        let mut w = vec![k / n as f64; n];
        let mut f = logdet_of(vs, &w);
        let mut step = 1.0;
        for _ in 0..iters {
            let m = InfoMatrix::from_weighted(p, vs.iter().zip(&w).map(|(v, &x)| (v.as_slice(), x))).unwrap();
            let grad: Vec<f64> = vs.iter().map(|v| m.inv_quad(v).unwrap()).collect();
            loop {
                let y: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
                let cand = project_simplex(&y, k);
                let fc = logdet_of(vs, &cand);
                if fc.is_finite() && fc >= f {
                    w = cand;
                    f = fc;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
                if step < 1e-16 {
                    return f;
                }
            }
        }
        f
    }

    fn project_simplex(y: &[f64], k: f64) -> Vec<f64> {
        let mut s = y.to_vec();
        s.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        let mut theta = 0.0;
        for (i, &v) in s.iter().enumerate() {
            acc += v;
            let t = (acc - k) / (i + 1) as f64;
            if v - t > 0.0 {
                theta = t;
            }
        }
        y.iter().map(|v| (v - theta).max(0.0)).collect()
    }

    fn pts(rows: &[Vec<i64>]) -> Vec<DesignPoint> {
        rows.iter().map(|r| DesignPoint(r.clone())).collect()
    }

    #[test]
    fn orthogonal_points_get_equal_weight() {
        let p = 4;
        let rows: Vec<Vec<i64>> = (0..p).map(|i| (0..p).map(|j| if i == j { 3 } else { 0 }).collect()).collect();
        let k = 10.0;
        for method in [MasterMethod::Multiplicative, MasterMethod::Hybrid] {
            let opts = MasterOptions { method, ..MasterOptions::default() };
            let cd = solve_restricted_master(&pts(&rows), k, &opts).unwrap();
            for &w in cd.weights() {
                assert!((w - k / p as f64).abs() < 1e-9);
            }
            let expected = p as f64 * (k / p as f64).ln() + p as f64 * 9f64.ln();
            assert!((cd.objective() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn full_cube_closed_form() {
        // free {0,1}^3 with a constant: p = 4, optimum 4 ln 8 - 6 ln 2
        let rows: Vec<Vec<i64>> = (0..8).map(|m| vec![1, m & 1, (m >> 1) & 1, (m >> 2) & 1]).collect();
        let cd = solve_restricted_master(&pts(&rows), 8.0, &MasterOptions::default()).unwrap();
        let expected = 4.0 * 8f64.ln() - 6.0 * 2f64.ln();
        assert!((cd.objective() - expected).abs() < 1e-8, "{} vs {expected}", cd.objective());
    }

    #[test]
    fn matches_projected_gradient_oracle() {
        let mut rng = seeded_rng(5);
        for _ in 0..3 {
            let rows: Vec<Vec<i64>> =
                (0..14).map(|_| (0..6).map(|j| if j == 0 { 1 } else { rng.gen_range(0..2) }).collect()).collect();
            let points = pts(&rows);
            let vs: Vec<Vec<f64>> = points.iter().map(|p| p.to_f64()).collect();
            let oracle = projected_gradient(&vs, 12.0, 4000);
            for method in [MasterMethod::Multiplicative, MasterMethod::Hybrid] {
                let opts = MasterOptions { method, tol: 1e-7, ..MasterOptions::default() };
                match solve_restricted_master(&points, 12.0, &opts) {
                    Ok(cd) => {
                        assert!((cd.objective() - oracle).abs() < 1e-5, "{method:?}: {} vs {oracle}", cd.objective())
                    }
                    Err(Error::RankTooLow { .. }) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn hybrid_converges_within_a_small_cap() {
        let mut rng = seeded_rng(9);
        let rows: Vec<Vec<i64>> =
            (0..400).map(|_| (0..10).map(|j| if j == 0 { 1 } else { rng.gen_range(0..2) }).collect()).collect();
        let points = pts(&rows);
        let k = 30.0;
        let opts = MasterOptions { max_iterations: 5_000, ..MasterOptions::default() };
        let cd = solve_restricted_master(&points, k, &opts).unwrap();
        let slow = MasterOptions { method: MasterMethod::Multiplicative, tol: 1e-6, ..MasterOptions::default() };
        let reference = solve_restricted_master(&points, k, &slow).unwrap();
        assert!(cd.objective() >= reference.objective() - 1e-9);
        assert!(cd.objective() - reference.objective() < 1e-5);
    }

    #[test]
    fn fixed_point_condition_holds() {
        let mut rng = seeded_rng(6);
        let rows: Vec<Vec<i64>> =
            (0..40).map(|_| (0..8).map(|j| if j == 0 { 1 } else { rng.gen_range(0..2) }).collect()).collect();
        let k = 16.0;
        let cd = solve_restricted_master(&pts(&rows), k, &MasterOptions::default()).unwrap();
        let m = cd.moment();
        let worst = cd.vectors().iter().map(|v| m.inv_quad(v).unwrap()).fold(0.0, f64::max);
        assert!(worst - 8.0 / k <= 1e-9 * 8.0 / k + 1e-12);
        assert!((cd.weights().iter().sum::<f64>() - k).abs() < 1e-9 * k);
    }

    #[test]
    fn warm_start_with_zero_weights() {
        let rows: Vec<Vec<i64>> = (0..8).map(|m| vec![1, m & 1, (m >> 1) & 1, (m >> 2) & 1]).collect();
        let mut w = vec![0.0; 8];
        for i in [0, 1, 2, 4, 7] {
            w[i] = 8.0 / 5.0;
        }
        let cd = solve_restricted_master_from(&pts(&rows), 8.0, &w, &MasterOptions::default()).unwrap();
        let expected = 4.0 * 8f64.ln() - 6.0 * 2f64.ln();
        assert!((cd.objective() - expected).abs() < 1e-8);
    }

    #[test]
    fn rejects_deficient_points() {
        let rows = vec![vec![1, 0, 0], vec![0, 1, 0], vec![1, 1, 0]];
        assert!(matches!(
            solve_restricted_master(&pts(&rows), 3.0, &MasterOptions::default()),
            Err(Error::RankTooLow { rank: 2, required: 3 })
        ));
    }

    #[test]
    fn line_search_step_improves() {
        assert_eq!(line_search_step(3.0, 4), 0.0);
        let t = line_search_step(8.0, 4);
        assert!(t > 0.0 && t < 1.0);
    }
}
