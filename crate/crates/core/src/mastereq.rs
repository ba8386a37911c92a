//! The master equation of the jump chain on the Weyl group.
//!
//! For a start at the origin every rate scales as `1/t`, so in `s = log(t/t0)`
//! the chain is homogeneous with generator `M`. Its spectrum gives the
//! relaxation exponents of `P(t, τ) → 1/|W|`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{DunklError, Result};
use crate::jumprates::RateTable;
use crate::linalg::symmetric_eigen_desc;
use crate::rng;
use crate::rootsys::Family;
use crate::stats::{fit_line, LineFit};
use crate::weylgroup::GroupTable;

/// Relative tolerance for grouping eigenvalues into multiplets.
pub const MULTIPLICITY_TOL: f64 = 1e-9;

/// `M_{τν} = Σ_α λ_α [ν = τσ_α] − Λ [ν = τ]`.
#[derive(Debug, Clone)]
pub struct MasterOperator {
    pub family: Family,
    pub rank: usize,
    pub matrix: DMatrix<f64>,
    /// Per-root rates at `t = 1`, positive-root order.
    pub rates: Vec<f64>,
    /// `Λ = Σ λ_α`
    pub lambda: f64,
    right_mult: Vec<Vec<usize>>,
    signs: Vec<i8>,
}

impl MasterOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `M̃ = M + ΛI`, the off-diagonal part.
    pub fn tilde(&self) -> DMatrix<f64> {
        &self.matrix + DMatrix::identity(self.dim(), self.dim()) * self.lambda
    }

    /// Determinant sign of every group element, in index order.
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `right_mult[a][τ]` is the index of `τσ_a`.
    pub fn right_mult(&self) -> &[Vec<usize>] {
        &self.right_mult
    }

    /// Largest absolute column sum.
    pub fn max_column_sum(&self) -> f64 {
        self.matrix
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// `dP/ds = M P` right-hand side for arbitrary rates, without building a
    /// matrix.
    fn apply_rates(&self, rates: &[f64], p: &[f64], out: &mut [f64]) {
        let total: f64 = rates.iter().sum();
        for (tau, o) in out.iter_mut().enumerate() {
            *o = -total * p[tau];
        }
        for (a, &l) in rates.iter().enumerate() {
            for (tau, o) in out.iter_mut().enumerate() {
                *o += l * p[self.right_mult[a][tau]];
            }
        }
    }
}

/// Builds `M` from rates at the origin reference.
pub fn build_master(rates: &RateTable, table: &GroupTable) -> Result<MasterOperator> {
    if rates.system != table.family || rates.n != table.rank {
        return Err(DunklError::Mismatch(format!(
            "rates for {}{} but group table for {}{}",
            rates.system, rates.n, table.family, table.rank
        )));
    }
    if !rates.is_at_origin() {
        return Err(DunklError::Mismatch(
            "master operator needs rates from the origin".into(),
        ));
    }
    let scaled: Vec<f64> = rates.lambdas().iter().map(|l| l * rates.t_ref).collect();
    build_master_from_rates(&scaled, table)
}

/// Builds `M` from per-root rates in positive-root order.
pub fn build_master_from_rates(rates: &[f64], table: &GroupTable) -> Result<MasterOperator> {
    if rates.len() != table.reflections.len() {
        return Err(DunklError::Mismatch(format!(
            "{} rates for {} positive roots",
            rates.len(),
            table.reflections.len()
        )));
    }
    if let Some(l) = rates.iter().find(|&&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(DunklError::Mismatch(format!("invalid rate {l}")));
    }
    let d = table.order;
    let lambda: f64 = rates.iter().sum();
    let mut m = DMatrix::zeros(d, d);
    for (a, &l) in rates.iter().enumerate() {
        for tau in 0..d {
            m[(tau, table.right_mult[a][tau])] += l;
        }
    }
    for tau in 0..d {
        m[(tau, tau)] -= lambda;
    }
    Ok(MasterOperator {
        family: table.family,
        rank: table.rank,
        matrix: m,
        rates: rates.to_vec(),
        lambda,
        right_mult: table.right_mult.clone(),
        signs: (0..d).map(|i| table.sign(i)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplet {
    pub value: f64,
    pub start: usize,
    pub multiplicity: usize,
}

/// Eigen-decomposition of `M`, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: DMatrix<f64>,
    pub groups: Vec<Multiplet>,
    /// Multiplet index of every eigenvalue.
    pub group_of: Vec<usize>,
    pub lambda: f64,
}

impl SpectrumResult {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Least negative nonzero eigenvalue.
    pub fn r1(&self) -> Option<f64> {
        self.groups.get(1).map(|g| g.value)
    }

    pub fn r_min(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn kernel_dimension(&self) -> usize {
        let scale = self.lambda.abs().max(1.0);
        self.values
            .iter()
            .filter(|v| v.abs() <= 1e-10 * scale)
            .count()
    }

    /// Coefficients `K_i = ⟨φ_i, P0⟩`.
    pub fn coefficients(&self, p0: &[f64]) -> Vec<f64> {
        let p = DVector::from_column_slice(p0);
        (0..self.dim())
            .map(|i| self.vectors.column(i).dot(&p))
            .collect()
    }

    /// Largest `|r_i + 2Λ + r_{n-1-i}|`: how far the sorted spectrum is from
    /// being symmetric about `−Λ`.
    pub fn symmetry_deviation(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| (self.values[i] - (-2.0 * self.lambda - self.values[n - 1 - i])).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `‖Mφ − rφ‖∞` over all pairs.
    pub fn max_residual(&self, m: &MasterOperator) -> f64 {
        (0..self.dim())
            .map(|i| {
                let v = self.vectors.column(i);
                (&m.matrix * v - v * self.values[i]).amax()
            })
            .fold(0.0, f64::max)
    }
}

/// Groups a descending list into multiplets within `tol` (relative to `scale`).
pub fn group_multiplets(values: &[f64], tol: f64, scale: f64) -> (Vec<Multiplet>, Vec<usize>) {
    let mut groups: Vec<Multiplet> = Vec::new();
    let mut group_of = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (values[i - 1] - v).abs() <= tol * scale => {
                g.multiplicity += 1;
                g.value += (v - g.value) / g.multiplicity as f64;
            }
            _ => groups.push(Multiplet {
                value: v,
                start: i,
                multiplicity: 1,
            }),
        }
        group_of.push(groups.len() - 1);
    }
    (groups, group_of)
}

pub fn spectrum(m: &MasterOperator) -> SpectrumResult {
    let (values, vectors) = symmetric_eigen_desc(&m.matrix);
    let scale = m.lambda.abs().max(1.0);
    let (groups, group_of) = group_multiplets(&values, MULTIPLICITY_TOL, scale);
    SpectrumResult {
        values,
        vectors,
        groups,
        group_of,
        lambda: m.lambda,
    }
}

fn check_distribution(p: &[f64], dim: usize) -> Result<()> {
    if p.len() != dim {
        return Err(DunklError::Dimension(format!(
            "distribution of length {} on |W| = {dim}",
            p.len()
        )));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| v < -1e-12) || (sum - 1.0).abs() > 1e-12 {
        return Err(DunklError::InvalidArgument(format!(
            "not a distribution (sum {sum})"
        )));
    }
    Ok(())
}

/// Point mass at group element `index`.
pub fn delta(dim: usize, index: usize) -> Vec<f64> {
    let mut p = vec![0.0; dim];
    p[index] = 1.0;
    p
}

pub fn uniform(dim: usize) -> Vec<f64> {
    vec![1.0 / dim as f64; dim]
}

/// `P(t) = Σ_i K_i (t/t0)^{r_i} φ_i` with `K_i = ⟨φ_i, P0⟩`.
pub fn solve_power_law(s: &SpectrumResult, p0: &[f64], t0: f64, t: f64) -> Result<Vec<f64>> {
    check_distribution(p0, s.dim())?;
    if !(t0 > 0.0) || t < t0 {
        return Err(DunklError::InvalidArgument(format!(
            "need t >= t0 > 0, got t0 = {t0}, t = {t}"
        )));
    }
    if t == t0 {
        return Ok(p0.to_vec());
    }
    let ratio = t / t0;
    let k = s.coefficients(p0);
    let mut p = DVector::zeros(s.dim());
    for (i, ki) in k.iter().enumerate() {
        p += s.vectors.column(i) * (ki * ratio.powf(s.values[i]));
    }
    Ok(p.iter().copied().collect())
}

/// Empirical distributions of simulated chains at each time of `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSeries {
    pub times: Vec<f64>,
    pub replicas: usize,
    /// `empirical[i][τ]` at `times[i]`.
    pub empirical: Vec<Vec<f64>>,
}

/// Simulates the homogeneous chain with generator `M` in `s = log(t/t0)`.
pub fn simulate_chain(
    m: &MasterOperator,
    p0: &[f64],
    t0: f64,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<ChainSeries> {
    check_distribution(p0, m.dim())?;
    if !(t0 > 0.0) || times.iter().any(|&t| t < t0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(DunklError::InvalidArgument(
            "times must be nondecreasing and >= t0 > 0".into(),
        ));
    }
    let svals: Vec<f64> = times.iter().map(|t| (t / t0).ln()).collect();
    let exp = (m.lambda > 0.0).then(|| Exp::new(m.lambda).expect("positive rate"));
    let states: Vec<Vec<usize>> = rng::replicate(replicas, seed, |_, rng| {
        let mut u = rng.random::<f64>();
        let mut tau = p0.len() - 1;
        for (i, &p) in p0.iter().enumerate() {
            if u < p {
                tau = i;
                break;
            }
            u -= p;
        }
        let mut s = 0.0;
        let mut out = Vec::with_capacity(svals.len());
        let mut next = exp.map_or(f64::INFINITY, |e| e.sample(rng));
        for &target in &svals {
            while s + next <= target {
                s += next;
                let mut v = rng.random::<f64>() * m.lambda;
                let mut root = m.rates.len() - 1;
                for (a, &l) in m.rates.iter().enumerate() {
                    if v < l {
                        root = a;
                        break;
                    }
                    v -= l;
                }
                tau = m.right_mult[root][tau];
                next = exp.map_or(f64::INFINITY, |e| e.sample(rng));
            }
            next -= target - s;
            s = target;
            out.push(tau);
        }
        out
    });
    let mut empirical = vec![vec![0.0; m.dim()]; times.len()];
    for row in &states {
        for (i, &tau) in row.iter().enumerate() {
            empirical[i][tau] += 1.0;
        }
    }
    for e in &mut empirical {
        for v in e.iter_mut() {
            *v /= replicas as f64;
        }
    }
    Ok(ChainSeries {
        times: times.to_vec(),
        replicas,
        empirical,
    })
}

/// Options for [`integrate_inhomogeneous`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Per-step error tolerance (mixed absolute/relative).
    pub tol: f64,
    /// Smallest allowed step in `log t`.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            tol: 1e-10,
            min_step: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dP/dt(τ) = Σ_α λ_α(t) (P(τσ_α) − P(τ))` from `P(t0) = P0`
/// and reports `P` at each time in `times`. `rate_fn(t)` returns per-root
/// rates in units of 1/time. The integration runs in `log t`.
pub fn integrate_inhomogeneous<F>(
    m: &MasterOperator,
    rate_fn: F,
    p0: &[f64],
    t0: f64,
    times: &[f64],
    opts: IntegratorOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64) -> Vec<f64>,
{
    check_distribution(p0, m.dim())?;
    if !(t0 > 0.0) || times.iter().any(|&t| t < t0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(DunklError::InvalidArgument(
            "times must be nondecreasing and >= t0 > 0".into(),
        ));
    }
    let d = m.dim();
    let rhs = |s: f64, p: &[f64], out: &mut [f64]| -> Result<()> {
        let t = t0 * s.exp();
        let rates = rate_fn(t);
        if rates.len() != m.rates.len() || rates.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(DunklError::InvalidArgument(format!(
                "invalid rates at t = {t}"
            )));
        }
        let scaled: Vec<f64> = rates.iter().map(|l| l * t).collect();
        m.apply_rates(&scaled, p, out);
        Ok(())
    };
    let mut p = p0.to_vec();
    let mut s = 0.0;
    let mut h: f64 = 1e-3;
    let mut k = vec![vec![0.0; d]; 7];
    let mut tmp = vec![0.0; d];
    let mut steps = 0usize;
    let mut out = Vec::with_capacity(times.len());
    rhs(s, &p, &mut k[0])?;
    for &t in times {
        let target = (t / t0).ln();
        while s < target {
            if steps >= opts.max_steps {
                return Err(DunklError::Stiffness { t: t0 * s.exp() });
            }
            steps += 1;
            let hh = h.min(target - s);
            for stage in 1..7 {
                for i in 0..d {
                    let mut acc = p[i];
                    for j in 0..stage {
                        acc += hh * DP_A[stage][j] * k[j][i];
                    }
                    tmp[i] = acc;
                }
                let (_, rest) = k.split_at_mut(stage);
                rhs(s + DP_C[stage] * hh, &tmp, &mut rest[0])?;
            }
            let mut err: f64 = 0.0;
            for i in 0..d {
                let e: f64 = (0..7).map(|j| DP_E[j] * k[j][i]).sum::<f64>() * hh;
                let sc = opts.tol * (1.0 + p[i].abs().max(tmp[i].abs()));
                err = err.max(e.abs() / sc);
            }
            if err <= 1.0 {
                for i in 0..d {
                    p[i] += hh * (0..7).map(|j| DP_B[j] * k[j][i]).sum::<f64>();
                }
                s += hh;
                // First-same-as-last: stage 7 was evaluated at the new point.
                let last = k[6].clone();
                k[0] = last;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = hh * factor;
            if err > 1.0 && h < opts.min_step {
                return Err(DunklError::Stiffness { t: t0 * s.exp() });
            }
        }
        out.push(p.clone());
    }
    Ok(out)
}

/// Power-law fit of the sup-norm distance to uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Fitted `r` in `‖P − 1/|W|‖∞ ≈ C t^r`.
    pub exponent: f64,
    pub stderr: f64,
    /// 95% confidence half-width.
    pub ci95: f64,
    pub constant: f64,
    pub points: usize,
}

/// Distances below this are treated as numerically zero.
const SIGNAL_FLOOR: f64 = 1e-13;

/// Least-squares slope of `log ‖P(t) − uniform‖∞` against `log t` over the
/// last `tail_fraction` of the series.
pub fn fit_relaxation_exponent(
    times: &[f64],
    series: &[Vec<f64>],
    tail_fraction: f64,
) -> Result<ExponentFit> {
    if times.len() != series.len() || times.len() < 3 {
        return Err(DunklError::InsufficientRange(
            "need at least 3 aligned points".into(),
        ));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(DunklError::InvalidArgument(format!(
            "tail fraction {tail_fraction} not in (0, 1]"
        )));
    }
    let (t_first, t_last) = (times[0], times[times.len() - 1]);
    if !(t_first > 0.0) || (t_last / t_first).log10() < 2.0 - 1e-12 {
        return Err(DunklError::InsufficientRange(format!(
            "series spans {t_first}..{t_last}, need 2 decades"
        )));
    }
    let start = ((1.0 - tail_fraction) * times.len() as f64).floor() as usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, p) in times[start..].iter().zip(&series[start..]) {
        let u = 1.0 / p.len() as f64;
        let d = p.iter().map(|v| (v - u).abs()).fold(0.0, f64::max);
        if d > SIGNAL_FLOOR {
            xs.push(t.ln());
            ys.push(d.ln());
        }
    }
    if xs.len() < 3 {
        return Err(DunklError::InsufficientRange(
            "no signal above the numerical floor".into(),
        ));
    }
    let LineFit {
        slope,
        intercept,
        slope_se,
        ..
    } = fit_line(&xs, &ys).ok_or_else(|| DunklError::InsufficientRange("degenerate fit".into()))?;
    Ok(ExponentFit {
        exponent: slope,
        stderr: slope_se,
        ci95: 1.96 * slope_se,
        constant: intercept.exp(),
        points: xs.len(),
    })
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
