//! Gaussian expectations by tensorized Gauss–Hermite quadrature or
//! antithetic Monte Carlo.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DunklError, Result};
use crate::linalg::tridiagonal_eigen;
use crate::rng;

/// Nodes and weights for `∫ f(t) e^{−t²} dt` (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(DunklError::Quadrature("need at least one node".into()));
    }
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let eig = tridiagonal_eigen(&diag, &off, true)?;
    let vecs = eig.vectors.expect("vectors requested");
    let mu0 = std::f64::consts::PI.sqrt();
    let weights = (0..n).map(|i| mu0 * vecs[(0, i)].powi(2)).collect();
    Ok((eig.values, weights))
}

/// `E[f(x)]` for `x ~ N(0, L Lᵀ)`, componentwise, with `nodes` per dimension.
pub fn gaussian_expectation_quadrature<F>(l: &DMatrix<f64>, nodes: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let d = l.nrows();
    let (t, w) = gauss_hermite(nodes)?;
    let norm = std::f64::consts::PI.powf(-(d as f64) / 2.0);
    let total = nodes
        .checked_pow(d as u32)
        .ok_or_else(|| DunklError::Quadrature("grid too large".into()))?;
    let mut acc: Option<Vec<f64>> = None;
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let y = DVector::from_iterator(d, idx.iter().map(|&i| std::f64::consts::SQRT_2 * t[i]));
        let weight: f64 = idx.iter().map(|&i| w[i]).product::<f64>() * norm;
        let x = l * y;
        let v = f(x.as_slice());
        match acc.as_mut() {
            None => acc = Some(v.iter().map(|a| a * weight).collect()),
            Some(a) => a.iter_mut().zip(&v).for_each(|(s, vi)| *s += vi * weight),
        }
        for k in 0..d {
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
        }
    }
    acc.ok_or_else(|| DunklError::Quadrature("empty grid".into()))
}

/// Monte Carlo `E[f(x)]` and standard errors for `x ~ N(0, L Lᵀ)`, with
/// antithetic pairs `(y, −y)`.
pub fn gaussian_expectation_mc<F>(
    l: &DMatrix<f64>,
    pairs: usize,
    seed: u64,
    f: F,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if pairs < 2 {
        return Err(DunklError::Quadrature(
            "need at least two antithetic pairs".into(),
        ));
    }
    let d = l.nrows();
    const CHUNK: usize = 4096;
    let chunks = pairs.div_ceil(CHUNK);
    let parts = rng::replicate(chunks, seed, |c, rng| {
        let count = CHUNK.min(pairs - c * CHUNK);
        let mut sum: Vec<f64> = Vec::new();
        let mut sumsq: Vec<f64> = Vec::new();
        for _ in 0..count {
            let y = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
            let x = l * &y;
            let a = f(x.as_slice());
            let b = f((-x).as_slice());
            if sum.is_empty() {
                sum = vec![0.0; a.len()];
                sumsq = vec![0.0; a.len()];
            }
            for k in 0..a.len() {
                let m = 0.5 * (a[k] + b[k]);
                sum[k] += m;
                sumsq[k] += m * m;
            }
        }
        (sum, sumsq)
    });
    let width = parts[0].0.len();
    let mut sum = vec![0.0; width];
    let mut sumsq = vec![0.0; width];
    for (s, q) in &parts {
        for k in 0..width {
            sum[k] += s[k];
            sumsq[k] += q[k];
        }
    }
    let n = pairs as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let se = (0..width)
        .map(|k| (((sumsq[k] / n - mean[k] * mean[k]) * n / (n - 1.0)).max(0.0) / n).sqrt())
        .collect();
    Ok((mean, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        let (t, w) = gauss_hermite(20).unwrap();
        let pi = std::f64::consts::PI;
        assert!((w.iter().sum::<f64>() - pi.sqrt()).abs() < 1e-13);
        // ∫ t^6 e^{-t²} = 15 √π / 8
        let m6: f64 = t.iter().zip(&w).map(|(x, wi)| wi * x.powi(6)).sum();
        assert!((m6 - 15.0 * pi.sqrt() / 8.0).abs() < 1e-12);
    }

    #[test]
    fn correlated_gaussian_moments() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let l = cov.clone().cholesky().unwrap().l();
        let q =
            gaussian_expectation_quadrature(&l, 8, |x| vec![x[0] * x[1], x[0].powi(4)]).unwrap();
        assert!((q[0] - 0.6).abs() < 1e-13);
        assert!((q[1] - 12.0).abs() < 1e-12);
        let (m, se) = gaussian_expectation_mc(&l, 200_000, 1, |x| vec![x[0] * x[1]]).unwrap();
        assert!((m[0] - 0.6).abs() < 4.0 * se[0]);
    }
}
