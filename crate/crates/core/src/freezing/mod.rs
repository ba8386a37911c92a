//! The `β → ∞` limit: the radial law concentrates on the peak vector `z`,
//! rates freeze to `|α|² k(α) / (4 (α·z)²)`, and for type A the master
//! operator becomes the Polychronakos–Frahm spin chain.

pub mod spinchain;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{DunklError, Result};
use crate::jumprates::{frozen_total_rate, RateSampler, RateTable};
use crate::linalg::{symmetric_eigen_desc, tridiagonal_eigen};
use crate::mastereq::{group_multiplets, Multiplet, MULTIPLICITY_TOL};
use crate::rootsys::{build_root_system, Family, Multiplicities, RootSystem};

pub const MAX_NEWTON_ITERATIONS: usize = 200;

/// Largest `N` for which the frozen type-A spectrum is computed (`|S_N| = 5040`).
pub const MAX_PF_N: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakVector {
    pub z: Vec<f64>,
    /// `max_i |z − Σ k(α) α / (α·z)|_i`
    pub residual: f64,
    /// `|z|²/2 − Σ k(α) log(α·z)`
    pub objective: f64,
    pub iterations: usize,
}

fn objective(r: &RootSystem<f64>, x: &[f64]) -> Option<f64> {
    let mut f = 0.5 * x.iter().map(|v| v * v).sum::<f64>();
    for a in &r.positive_roots {
        let d = a.dot(x);
        if !(d > 0.0) {
            return None;
        }
        f -= a.k * d.ln();
    }
    Some(f)
}

/// `z − Σ k(α) α / (α·z)`
pub fn fixed_point_defect(r: &RootSystem<f64>, x: &[f64]) -> Vec<f64> {
    let mut g = x.to_vec();
    for a in &r.positive_roots {
        let d = a.dot(x);
        for (gi, ai) in g.iter_mut().zip(&a.vec) {
            *gi -= a.k * ai / d;
        }
    }
    g
}

/// `I + Σ k(α) α αᵀ / (α·x)²`, the Hessian of the peak objective.
pub fn objective_hessian(r: &RootSystem<f64>, x: &[f64]) -> DMatrix<f64> {
    let n = r.rank;
    let mut h = DMatrix::identity(n, n);
    for a in &r.positive_roots {
        let d = a.dot(x);
        let v = DVector::from_column_slice(&a.vec);
        h += &v * v.transpose() * (a.k / (d * d));
    }
    h
}

fn initial_guess(r: &RootSystem<f64>) -> Vec<f64> {
    let n = r.rank;
    let raw: Vec<f64> = match r.family {
        Family::A => {
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            (0..n)
                .map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64))
                .collect()
        }
        Family::B => (1..=n).map(|i| i as f64).collect(),
    };
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if norm > 0.0 {
        r.gamma.sqrt() / norm
    } else {
        0.0
    };
    raw.iter().map(|v| v * scale).collect()
}

fn project_sum_zero(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Minimizer of `|x|²/2 − Σ k(α) log(α·x)` in the chamber by damped Newton.
pub fn peak_vector(r: &RootSystem<f64>) -> Result<PeakVector> {
    if r.positive_roots.iter().any(|a| !(a.k > 0.0)) {
        return Err(DunklError::InvalidArgument(
            "peak vector needs k(α) > 0".into(),
        ));
    }
    let n = r.rank;
    if n == 1 && r.family == Family::A {
        return Ok(PeakVector {
            z: vec![0.0],
            residual: 0.0,
            objective: 0.0,
            iterations: 0,
        });
    }
    let mut x = initial_guess(r);
    let mut f = objective(r, &x).ok_or(DunklError::Convergence {
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let scale = r.gamma.sqrt().max(1.0);
    let mut residual = f64::INFINITY;
    for it in 0..MAX_NEWTON_ITERATIONS {
        let mut g = fixed_point_defect(r, &x);
        if r.family == Family::A {
            project_sum_zero(&mut g);
        }
        residual = g.iter().fold(0.0, |m, v| m.max(v.abs()));
        if residual <= 1e-14 * scale {
            return Ok(PeakVector {
                z: x,
                residual,
                objective: f,
                iterations: it,
            });
        }
        let h = objective_hessian(r, &x);
        let chol = h.cholesky().ok_or(DunklError::Convergence {
            iterations: it,
            residual,
        })?;
        let mut step: Vec<f64> = chol
            .solve(&DVector::from_column_slice(&g))
            .iter()
            .map(|v| -v)
            .collect();
        if r.family == Family::A {
            project_sum_zero(&mut step);
        }
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        if -slope < 1e-10 * (1.0 + f.abs()) {
            // Quadratic regime: the decrease is below the resolution of `f`.
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            if let Some(ft) = objective(r, &trial) {
                x = trial;
                f = ft;
                continue;
            }
        }
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            if let Some(ft) = objective(r, &trial).filter(|&ft| ft <= f + 1e-4 * t * slope) {
                x = trial;
                f = ft;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                // No further decrease is representable.
                if residual <= 1e-12 {
                    return Ok(PeakVector {
                        z: x,
                        residual,
                        objective: f,
                        iterations: it,
                    });
                }
                return Err(DunklError::Convergence {
                    iterations: it,
                    residual,
                });
            }
        }
    }
    Err(DunklError::Convergence {
        iterations: MAX_NEWTON_ITERATIONS,
        residual,
    })
}

/// Sorted zeros of the physicists' Hermite polynomial `H_n`, as eigenvalues
/// of its Jacobi matrix.
pub fn hermite_zeros(n: usize) -> Result<Vec<f64>> {
    if !(1..=50).contains(&n) {
        return Err(DunklError::InvalidArgument(format!(
            "hermite_zeros needs 1 <= N <= 50, got {n}"
        )));
    }
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut z = tridiagonal_eigen(&diag, &off, false)?.values;
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // The spectrum is symmetric; enforce it exactly.
    for i in 0..n / 2 {
        let m = 0.5 * (z[n - 1 - i] - z[i]);
        z[i] = -m;
        z[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        z[n / 2] = 0.0;
    }
    Ok(z)
}

/// Largest deviation in `z_i = Σ_{k≠i} 1/(z_i − z_k)`.
pub fn hermite_linear_defect(z: &[f64]) -> f64 {
    (0..z.len())
        .map(|i| {
            let s: f64 = (0..z.len())
                .filter(|&k| k != i)
                .map(|k| 1.0 / (z[i] - z[k]))
                .sum();
            (z[i] - s).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest deviation in `z_i = Σ_{k≠i} 2/(z_i − z_k)³`.
pub fn hermite_cubic_defect(z: &[f64]) -> f64 {
    (0..z.len())
        .map(|i| {
            let s: f64 = (0..z.len())
                .filter(|&k| k != i)
                .map(|k| 2.0 / (z[i] - z[k]).powi(3))
                .sum();
            (z[i] - s).abs()
        })
        .fold(0.0, f64::max)
}

/// `|α|² k(α) / (4 (α·z)²)` in positive-root order.
pub fn frozen_rates(r: &RootSystem<f64>, z: &[f64]) -> Vec<f64> {
    r.positive_roots
        .iter()
        .map(|a| {
            let d = a.dot(z);
            a.norm_sq * a.k / (4.0 * d * d)
        })
        .collect()
}

pub fn frozen_rate_table(r: &RootSystem<f64>, peak: &PeakVector) -> RateTable {
    let mut t = RateTable::from_exact(r, &frozen_rates(r, &peak.z), RateSampler::Frozen);
    t.total_closed_form = r
        .has_unit_multiplicities()
        .then(|| frozen_total_rate(r.num_roots()));
    t
}

/// Frozen type-A operator built directly from permutations:
/// `(1/2) Σ_{i<j} f(τ σ_{ij}) / (z_j − z_i)² − (N(N−1)/8) f(τ)`, rows
/// indexed by permutations in lexicographic order.
pub fn pf_operator(z: &[f64]) -> (Vec<Vec<usize>>, DMatrix<f64>) {
    let n = z.len();
    let mut perms: Vec<Vec<usize>> = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        perms.push(p.clone());
        // Next permutation in lexicographic order.
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
    }
    let index: HashMap<Vec<usize>, usize> = perms
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, p)| (p, i))
        .collect();
    let d = perms.len();
    let mut m = DMatrix::zeros(d, d);
    let lambda = (n * (n.saturating_sub(1))) as f64 / 8.0;
    for (row, tau) in perms.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                let mut q = tau.clone();
                q.swap(i, j);
                m[(row, index[&q])] += 0.5 / (z[j] - z[i]).powi(2);
            }
        }
        m[(row, row)] -= lambda;
    }
    (perms, m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PfSpectrumReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub z: Vec<f64>,
    pub rates: RateTable,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub groups: Vec<Multiplet>,
    /// Multiplicity of the eigenvalue `−1/2`.
    pub half_multiplicity: usize,
    #[serde(skip)]
    pub eigenvectors: DMatrix<f64>,
}

/// Frozen type-A spectrum from the Hermite zeros.
pub fn pf_spectrum(n: usize) -> Result<PfSpectrumReport> {
    if n < 2 {
        return Err(DunklError::InvalidArgument(
            "pf_spectrum needs N >= 2".into(),
        ));
    }
    if n > MAX_PF_N {
        let order = (1..=n).product();
        return Err(DunklError::Size {
            order,
            cap: (1..=MAX_PF_N).product(),
        });
    }
    let r = build_root_system::<f64>(Family::A, n, 2.0, &Multiplicities::unit())?;
    let z = hermite_zeros(n)?;
    let peak = PeakVector {
        residual: fixed_point_defect(&r, &z)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs())),
        objective: objective(&r, &z).unwrap_or(f64::NAN),
        z: z.clone(),
        iterations: 0,
    };
    let rates = frozen_rate_table(&r, &peak);
    let (_, m) = pf_operator(&z);
    let (values, vectors) = symmetric_eigen_desc(&m);
    let (groups, _) = group_multiplets(&values, MULTIPLICITY_TOL, rates.total.max(1.0));
    let half_multiplicity = groups
        .iter()
        .filter(|g| (g.value + 0.5).abs() < 1e-9)
        .map(|g| g.multiplicity)
        .sum();
    Ok(PfSpectrumReport {
        n,
        z,
        rates,
        eigenvalues: values,
        groups,
        half_multiplicity,
        eigenvectors: vectors,
    })
}
