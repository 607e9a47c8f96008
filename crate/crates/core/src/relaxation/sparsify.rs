use nalgebra::DMatrix;

use super::ContinuousDesign;
use crate::error::{Error, Result};

/// `C(p,2) + p + 1`: the number of independent equalities fixing the moment
/// matrix and the weight sum, hence the support size of a basic solution.
pub fn support_bound(p: usize) -> usize {
    p * (p - 1) / 2 + p + 1
}

/// Weights at or below this fraction of `k` count as zero.
const ZERO_WEIGHT: f64 = 1e-13;

/// Reduces the support to at most [`support_bound`]`(p)` points with the
/// same moment matrix and weight sum. Each step takes `bound + 1` support
/// points, finds a kernel vector of their (moment + sum) equality system and
/// moves along it until one weight reaches zero. Point order is kept;
/// dropped points get weight 0.
pub fn sparsify(cd: &ContinuousDesign) -> Result<ContinuousDesign> {
    let p = cd.p();
    let bound = support_bound(p);
    let mut w = cd.weights().to_vec();
    let floor = ZERO_WEIGHT * cd.k();
    if w.iter().filter(|&&x| x > 0.0).count() <= bound {
        return Ok(cd.clone());
    }
    w.iter_mut().filter(|x| **x <= floor).for_each(|x| *x = 0.0);
    let rows = bound;
    loop {
        let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        if support.len() <= bound {
            break;
        }
        let cols = &support[..rows + 1];
        let a = DMatrix::from_fn(
            rows + 1,
            rows + 1,
            |r, c| {
                if r < rows {
                    entry(&cd.vectors()[cols[c]], r, p)
                } else {
                    0.0
                }
            },
        );
        let z = kernel_vector(a)?;
        // z sums to zero, so it has a positive entry
        let (t, hit) = cols
            .iter()
            .zip(z.iter())
            .filter(|(_, &zi)| zi > 0.0)
            .map(|(&i, &zi)| (w[i] / zi, i))
            .fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 { b } else { a });
        if hit == usize::MAX {
            return Err(Error::Numerical("kernel vector has no positive entry".into()));
        }
        for (&i, &zi) in cols.iter().zip(z.iter()) {
            w[i] = (w[i] - t * zi).max(0.0);
        }
        w[hit] = 0.0;
        for &i in cols {
            if w[i] <= floor {
                w[i] = 0.0;
            }
        }
    }
    let total: f64 = w.iter().sum();
    let k = cd.k();
    w.iter_mut().for_each(|x| *x *= k / total);
    ContinuousDesign::new(cd.points().to_vec(), w, k)
}

/// Row `r` of the equality system for design vector `v`: the upper-triangle
/// moment entries `v_a v_b` (`a ≤ b`) followed by the constant 1.
fn entry(v: &[f64], r: usize, p: usize) -> f64 {
    let mut idx = r;
    for a in 0..p {
        let len = p - a;
        if idx < len {
            return v[a] * v[a + idx];
        }
        idx -= len;
    }
    1.0
}

/// Unit vector `z` with `Az ≈ 0` for a square, rank-deficient `A`.
fn kernel_vector(a: DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.ncols();
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return V".into()))?;
    let (idx, &smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Numerical("empty system".into()))?;
    if smin > 1e-8 * scale * n as f64 {
        return Err(Error::Numerical(format!("no kernel vector: smallest singular value {smin}")));
    }
    Ok(vt.row(idx).iter().copied().collect())
}
