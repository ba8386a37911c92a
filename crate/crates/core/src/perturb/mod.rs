//! First-order corrections in `1/β` around the frozen limit.
//!
//! Near the peak vector the radial law is Gaussian with precision `H`, and
//! each frozen rate picks up a factor `1 + C̃(α)/β`. Propagating these
//! through the master operator gives the first-order exponent shifts.

pub mod quadrature;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DunklError, Result};
use crate::freezing::{frozen_rates, objective_hessian, peak_vector};
use crate::jumprates::estimate_rates_origin;
use crate::linalg::symmetric_eigen_desc;
use crate::mastereq::{build_master, build_master_from_rates, spectrum, SpectrumResult};
use crate::rng::derive_seed;
use crate::rootsys::{build_root_system, Family, Multiplicities, RootSystem};
use crate::stats::fit_line;
use crate::weylgroup::{enumerate, GroupTable};

use quadrature::{gaussian_expectation_mc, gaussian_expectation_quadrature};

/// Gauss–Hermite nodes per dimension.
pub const QUADRATURE_NODES: usize = 20;
/// Largest rank integrated by quadrature.
pub const MAX_QUADRATURE_RANK: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `E[u² + ½(2u − A)²]`
    Paper,
    /// `E[3u² − 2uA]`
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    GaussQuadrature,
    Mc { pairs: usize, seed: u64 },
}

impl Method {
    /// Quadrature up to rank 3, Monte Carlo above.
    pub fn auto(rank: usize, pairs: usize, seed: u64) -> Self {
        if rank <= MAX_QUADRATURE_RANK {
            Method::GaussQuadrature
        } else {
            Method::Mc { pairs, seed }
        }
    }
}

/// `H = I + Σ k(ζ) ζζᵀ / (ζ·z)²`
pub fn hessian(r: &RootSystem<f64>, z: &[f64]) -> DMatrix<f64> {
    objective_hessian(r, z)
}

/// `C̃(α)` for every positive root, with the first-order sum rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtildeTable {
    pub variant: Variant,
    pub values: Vec<f64>,
    /// Zero for quadrature.
    pub stderrs: Vec<f64>,
    /// `Σ |α|² C̃(α) / (4 (α·z)²) − |R_+|/4` (unit multiplicities only).
    pub sum_rule_residual: Option<f64>,
    pub sum_rule_stderr: Option<f64>,
}

/// Integrand values for all roots at one Gaussian point `x`, followed by
/// the sum-rule combination.
fn integrand(
    r: &RootSystem<f64>,
    z_dots: &[f64],
    sum_w: Option<&[f64]>,
    variant: Variant,
    x: &[f64],
) -> Vec<f64> {
    let u: Vec<f64> = r
        .positive_roots
        .iter()
        .zip(z_dots)
        .map(|(a, d)| a.dot(x) / d)
        .collect();
    let big_a: f64 = r
        .positive_roots
        .iter()
        .zip(&u)
        .map(|(a, ui)| a.k * ui.powi(3))
        .sum::<f64>()
        / 3.0;
    let mut out: Vec<f64> = u
        .iter()
        .map(|&ua| match variant {
            Variant::Paper => ua * ua + 0.5 * (2.0 * ua - big_a).powi(2),
            Variant::Corrected => 3.0 * ua * ua - 2.0 * ua * big_a,
        })
        .collect();
    if let Some(w) = sum_w {
        let s = out.iter().zip(w).map(|(v, wi)| v * wi).sum::<f64>();
        out.push(s);
    }
    out
}

pub fn ctilde_table(
    r: &RootSystem<f64>,
    z: &[f64],
    variant: Variant,
    method: Method,
) -> Result<CtildeTable> {
    let h = hessian(r, z);
    let cov = h
        .cholesky()
        .ok_or_else(|| DunklError::Quadrature("Hessian is not positive definite".into()))?
        .inverse();
    let l = cov
        .cholesky()
        .ok_or_else(|| DunklError::Quadrature("covariance is not positive definite".into()))?
        .l();
    let z_dots: Vec<f64> = r.positive_roots.iter().map(|a| a.dot(z)).collect();
    let unit = r.has_unit_multiplicities();
    let w0: Vec<f64> = r
        .positive_roots
        .iter()
        .zip(&z_dots)
        .map(|(a, d)| a.norm_sq / (4.0 * d * d))
        .collect();
    let sum_w = unit.then_some(w0.as_slice());
    let f = |x: &[f64]| integrand(r, &z_dots, sum_w, variant, x);
    let (mut values, mut stderrs) = match method {
        Method::GaussQuadrature => {
            if r.rank > MAX_QUADRATURE_RANK {
                return Err(DunklError::Quadrature(format!(
                    "quadrature limited to rank {MAX_QUADRATURE_RANK}, got {}",
                    r.rank
                )));
            }
            let v = gaussian_expectation_quadrature(&l, QUADRATURE_NODES, f)?;
            let n = v.len();
            (v, vec![0.0; n])
        }
        Method::Mc { pairs, seed } => {
            gaussian_expectation_mc(&l, pairs, derive_seed(seed, "ctilde"), f)?
        }
    };
    let (sum_rule_residual, sum_rule_stderr) = if unit {
        let s = values.pop().unwrap();
        let se = stderrs.pop().unwrap();
        (Some(s - r.num_roots() as f64 / 4.0), Some(se))
    } else {
        (None, None)
    };
    Ok(CtildeTable {
        variant,
        values,
        stderrs,
        sum_rule_residual,
        sum_rule_stderr,
    })
}

/// First-order shifts of one frozen multiplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrder {
    pub r0: f64,
    pub multiplicity: usize,
    /// Eigenvalues of the projected perturbation, descending.
    pub r1: Vec<f64>,
}

/// `V = Σ_α w_α (S_α − I)`, the `1/β` coefficient of the master operator
/// when every rate is `λ_α⁽⁰⁾ + w_α/β`.
pub fn perturbation_operator(w: &[f64], table: &GroupTable) -> Result<DMatrix<f64>> {
    if w.len() != table.reflections.len() {
        return Err(DunklError::Mismatch(format!(
            "{} weights for {} roots",
            w.len(),
            table.reflections.len()
        )));
    }
    let d = table.order;
    let mut v = DMatrix::zeros(d, d);
    for (a, &wa) in w.iter().enumerate() {
        for tau in 0..d {
            v[(tau, table.right_mult[a][tau])] += wa;
            v[(tau, tau)] -= wa;
        }
    }
    Ok(v)
}

/// Degenerate first-order perturbation theory on every multiplet of the
/// frozen spectrum. `w_α = |α|² C̃(α) / (4 (α·z)²)`.
pub fn first_order_exponents(
    frozen: &SpectrumResult,
    w: &[f64],
    table: &GroupTable,
) -> Result<Vec<FirstOrder>> {
    if frozen.dim() != table.order {
        return Err(DunklError::Mismatch(format!(
            "spectrum of size {} for |W| = {}",
            frozen.dim(),
            table.order
        )));
    }
    let v = perturbation_operator(w, table)?;
    frozen
        .groups
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            if gi == 0 && g.multiplicity == 1 && g.value.abs() < 1e-10 {
                // The kernel is the constants, which `V` annihilates.
                return Ok(FirstOrder {
                    r0: g.value,
                    multiplicity: 1,
                    r1: vec![0.0],
                });
            }
            let phi = frozen.vectors.columns(g.start, g.multiplicity).into_owned();
            let p = phi.transpose() * &v * &phi;
            let p = (&p + p.transpose()) * 0.5;
            let (vals, _) = symmetric_eigen_desc(&p);
            Ok(FirstOrder {
                r0: g.value,
                multiplicity: g.multiplicity,
                r1: vals,
            })
        })
        .collect()
}

/// Everything the first-order theory needs for one system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub family: Family,
    #[serde(rename = "N")]
    pub n: usize,
    pub z: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    pub ctilde_paper: CtildeTable,
    pub ctilde_corrected: CtildeTable,
    pub frozen_rates: Vec<f64>,
    /// Frozen multiplets with their first-order shifts (corrected variant).
    pub exponents: Vec<FirstOrder>,
    pub gamma: f64,
    /// `min_ζ ζ·z / (|ζ| √γ)`
    pub r_star: f64,
}

impl PerturbationReport {
    /// Least negative nonzero frozen exponent and its largest first-order shift.
    pub fn r1_pair(&self) -> Option<(f64, f64)> {
        self.exponents.get(1).map(|g| (g.r0, g.r1[0]))
    }

    /// `r⁽⁰⁾ + r⁽¹⁾/β` for the least negative nonzero exponent.
    pub fn predict_r1(&self, beta: f64) -> Option<f64> {
        self.r1_pair().map(|(r0, r1)| r0 + r1 / beta)
    }
}

/// Builds the report with unit multiplicities.
pub fn perturbation_report(family: Family, n: usize, method: Method) -> Result<PerturbationReport> {
    let r = build_root_system::<f64>(family, n, 2.0, &Multiplicities::unit())?;
    let peak = peak_vector(&r)?;
    let z = peak.z.clone();
    let h = hessian(&r, &z);
    let ctilde_paper = ctilde_table(&r, &z, Variant::Paper, method)?;
    let ctilde_corrected = ctilde_table(&r, &z, Variant::Corrected, method)?;
    let rates = frozen_rates(&r, &z);
    let table = enumerate(&r)?;
    let frozen = spectrum(&build_master_from_rates(&rates, &table)?);
    let w: Vec<f64> = rates
        .iter()
        .zip(&ctilde_corrected.values)
        .map(|(l, c)| l * c)
        .collect();
    let exponents = first_order_exponents(&frozen, &w, &table)?;
    let r_star = r
        .positive_roots
        .iter()
        .map(|a| a.dot(&z) / (a.norm_sq.sqrt() * r.gamma.sqrt()))
        .fold(f64::INFINITY, f64::min);
    Ok(PerturbationReport {
        family,
        n,
        z,
        hessian: (0..n).map(|i| h.row(i).iter().copied().collect()).collect(),
        ctilde_paper,
        ctilde_corrected,
        frozen_rates: rates,
        exponents,
        gamma: r.gamma,
        r_star,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub beta: f64,
    pub r1_predicted: f64,
    pub r1_zeroth: f64,
    pub r1_measured: f64,
    pub stderr: f64,
}

/// Compares `r⁽⁰⁾ + r⁽¹⁾/β` with the `r₁` of the master operator built
/// from Monte Carlo rates.
pub fn predict_vs_measured(
    report: &PerturbationReport,
    betas: &[f64],
    nsamples: usize,
    seed: u64,
) -> Result<Vec<PredictionRow>> {
    let (r0, _) = report
        .r1_pair()
        .ok_or_else(|| DunklError::Mismatch("no nonzero frozen exponent".into()))?;
    betas
        .iter()
        .map(|&beta| {
            let r =
                build_root_system::<f64>(report.family, report.n, beta, &Multiplicities::unit())?;
            let table = enumerate(&r)?;
            let rates =
                estimate_rates_origin(&r, nsamples, derive_seed(seed, &format!("beta={beta}")))?;
            let m = build_master(&rates, &table)?;
            let s = spectrum(&m);
            let g = s
                .groups
                .get(1)
                .ok_or_else(|| DunklError::Mismatch("no nonzero exponent".into()))?;
            // Hellmann–Feynman: ∂r/∂λ_α averaged over the multiplet.
            let mut var = 0.0;
            for (a, se) in rates.stderrs().iter().enumerate() {
                let mut dr = 0.0;
                for i in g.start..g.start + g.multiplicity {
                    let phi = s.vectors.column(i);
                    let shifted = DVector::from_iterator(
                        phi.len(),
                        (0..phi.len()).map(|t| phi[table.right_mult[a][t]]),
                    );
                    dr += phi.dot(&shifted) - 1.0;
                }
                dr /= g.multiplicity as f64;
                var += (dr * se).powi(2);
            }
            Ok(PredictionRow {
                beta,
                r1_predicted: report.predict_r1(beta).unwrap(),
                r1_zeroth: r0,
                r1_measured: g.value,
                stderr: var.sqrt(),
            })
        })
        .collect()
}

/// Fits `r₁(β) = a + b/β` to measured rows; returns `(a, se(a))`.
pub fn extrapolate_r1(rows: &[PredictionRow]) -> Option<(f64, f64)> {
    let x: Vec<f64> = rows.iter().map(|r| 1.0 / r.beta).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.r1_measured).collect();
    let fit = fit_line(&x, &y)?;
    // Intercept standard error from the slope error and the spread of x.
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let se = fit.slope_se * (sxx / n + mx * mx).sqrt();
    Some((fit.intercept, se))
}
