//! Draws from the law of `X̂(1)` given `X̂(0) = 0`, whose density on the
//! chamber is proportional to `exp(-|x|^2/2) w_beta(x)`.
//!
//! The default backend diagonalizes tridiagonal beta-ensemble matrices
//! (Hermite type for `A`, Laguerre type for `B`); random-walk Metropolis is
//! the fallback.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DunklError, Result};
use crate::linalg::tridiagonal_eigen;
use crate::rng::{self, StreamRng};
use crate::rootsys::{Family, Orbit, RootSystem};
use crate::scalar::{norm_sq, Real};

pub const MCMC_BURN_IN: usize = 1_000;
pub const MCMC_THIN: usize = 10;
const MCMC_CHAIN_LEN: usize = 10_000;
const TRIDIAGONAL_CHUNK: usize = 4_096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerTag {
    Tridiagonal,
    Mcmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Tridiagonal when the parameters admit it, otherwise MCMC.
    Auto,
    Tridiagonal,
    Mcmc,
}

#[derive(Debug, Clone)]
pub struct StaticSample<T: Real> {
    pub points: Vec<Vec<T>>,
    pub beta: T,
    pub sampler_tag: SamplerTag,
    pub acceptance_rate: Option<f64>,
}

/// `E|X|^2 = N + beta * gamma`, by homogeneity of `w_beta`.
pub fn calibration_target<T: Real>(r: &RootSystem<T>) -> f64 {
    r.rank as f64 + r.beta.as_f64() * r.gamma.as_f64()
}

/// Mean of `|x|^2` and its standard error (batch means for MCMC output).
pub fn second_moment<T: Real>(s: &StaticSample<T>) -> (f64, f64) {
    let v: Vec<f64> = s.points.iter().map(|p| norm_sq(p).as_f64()).collect();
    match s.sampler_tag {
        SamplerTag::Tridiagonal => crate::stats::mean_se(&v),
        SamplerTag::Mcmc => crate::stats::batch_means(&v, 100),
    }
}

/// Chi variates for the tridiagonal models, built once per system.
struct EnsembleModel {
    family: Family,
    /// Diagonal chi degrees of freedom (Laguerre only).
    diag: Vec<Gamma<f64>>,
    /// Off-diagonal chi degrees of freedom.
    off: Vec<Gamma<f64>>,
}

fn chi_gamma(df: f64) -> Option<Gamma<f64>> {
    (df > 0.0 && df.is_finite())
        .then(|| Gamma::new(df / 2.0, 2.0).ok())
        .flatten()
}

impl EnsembleModel {
    fn new<T: Real>(r: &RootSystem<T>) -> Option<Self> {
        let n = r.rank;
        let beta = r.beta.as_f64();
        match r.family {
            Family::A => {
                let b = beta * r.multiplicities.get(Orbit::A);
                let off = (1..n)
                    .map(|i| chi_gamma(b * (n - i) as f64))
                    .collect::<Option<Vec<_>>>()?;
                Some(EnsembleModel {
                    family: Family::A,
                    diag: vec![],
                    off,
                })
            }
            Family::B => {
                let bl = beta * r.multiplicities.get(Orbit::Long);
                let bs = beta * r.multiplicities.get(Orbit::Short);
                // Squared coordinates follow a Laguerre ensemble with exponent
                // (bs - 1)/2 on each eigenvalue and repulsion bl.
                let a = (bs - 1.0) / 2.0 + 1.0 + bl * (n as f64 - 1.0) / 2.0;
                let diag = (0..n)
                    .map(|i| chi_gamma(2.0 * a - bl * i as f64))
                    .collect::<Option<Vec<_>>>()?;
                let off = (1..n)
                    .map(|i| chi_gamma(bl * (n - i) as f64))
                    .collect::<Option<Vec<_>>>()?;
                Some(EnsembleModel {
                    family: Family::B,
                    diag,
                    off,
                })
            }
        }
    }

    fn chi(g: &Gamma<f64>, rng: &mut StreamRng) -> f64 {
        g.sample(rng).sqrt()
    }

    fn draw<T: Real>(&self, n: usize, rng: &mut StreamRng) -> Result<Vec<T>> {
        match self.family {
            Family::A => {
                let d: Vec<T> = (0..n)
                    .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                let s2 = std::f64::consts::FRAC_1_SQRT_2;
                let e: Vec<T> = self
                    .off
                    .iter()
                    .map(|g| T::of(Self::chi(g, rng) * s2))
                    .collect();
                Ok(tridiagonal_eigen(&d, &e, false)?.values)
            }
            Family::B => {
                let d: Vec<f64> = self.diag.iter().map(|g| Self::chi(g, rng)).collect();
                let s: Vec<f64> = self.off.iter().map(|g| Self::chi(g, rng)).collect();
                // L = B B^T for the lower bidiagonal B with diagonal d and subdiagonal s.
                let ld: Vec<T> = (0..n)
                    .map(|i| T::of(d[i] * d[i] + if i > 0 { s[i - 1] * s[i - 1] } else { 0.0 }))
                    .collect();
                let le: Vec<T> = (0..n.saturating_sub(1))
                    .map(|i| T::of(d[i] * s[i]))
                    .collect();
                let ev = tridiagonal_eigen(&ld, &le, false)?.values;
                Ok(ev.into_iter().map(|l| l.max(T::zero()).sqrt()).collect())
            }
        }
    }
}

/// A single exact draw (tridiagonal backend) or an error when the
/// parameters do not map onto an ensemble.
pub(crate) fn draw_one<T: Real>(r: &RootSystem<T>, rng: &mut StreamRng) -> Result<Vec<T>> {
    let model = EnsembleModel::new(r).ok_or_else(|| {
        DunklError::InvalidArgument("multiplicities have no beta-ensemble representation".into())
    })?;
    model.draw(r.rank, rng)
}

pub fn sample_static<T: Real>(r: &RootSystem<T>, n: usize, seed: u64) -> Result<StaticSample<T>> {
    sample_static_with(r, n, seed, Backend::Auto)
}

pub fn sample_static_with<T: Real>(
    r: &RootSystem<T>,
    n: usize,
    seed: u64,
    backend: Backend,
) -> Result<StaticSample<T>> {
    if n == 0 {
        return Err(DunklError::InvalidArgument(
            "need at least one sample".into(),
        ));
    }
    let model = EnsembleModel::new(r);
    match (backend, model) {
        (Backend::Mcmc, _) => sample_mcmc(r, n, seed),
        (Backend::Tridiagonal, None) => Err(DunklError::InvalidArgument(
            "tridiagonal sampler unavailable for these multiplicities".into(),
        )),
        (Backend::Auto, None) => {
            log::warn!("tridiagonal sampler unavailable; falling back to MCMC");
            sample_mcmc(r, n, seed)
        }
        (_, Some(model)) => {
            let chunks = n.div_ceil(TRIDIAGONAL_CHUNK);
            let parts = rng::replicate(chunks, seed, |c, rng| {
                let len = TRIDIAGONAL_CHUNK.min(n - c * TRIDIAGONAL_CHUNK);
                (0..len)
                    .map(|_| model.draw::<T>(r.rank, rng))
                    .collect::<Result<Vec<_>>>()
            });
            let mut points = Vec::with_capacity(n);
            for p in parts {
                points.extend(p?);
            }
            Ok(StaticSample {
                points,
                beta: r.beta,
                sampler_tag: SamplerTag::Tridiagonal,
                acceptance_rate: None,
            })
        }
    }
}

fn log_target<T: Real>(r: &RootSystem<T>, x: &[T]) -> f64 {
    r.log_weight(x).as_f64() - 0.5 * norm_sq(x).as_f64()
}

/// An interior starting point of the right scale.
fn mcmc_start<T: Real>(r: &RootSystem<T>) -> Vec<f64> {
    let mut m: Vec<f64> = r.chamber_vector().into_iter().map(|v| v.as_f64()).collect();
    if r.family == Family::A {
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        m.iter_mut().for_each(|v| *v -= mean);
    }
    let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = calibration_target(r).sqrt();
    m.into_iter().map(|v| v * target / norm).collect()
}

fn sample_mcmc<T: Real>(r: &RootSystem<T>, n: usize, seed: u64) -> Result<StaticSample<T>> {
    let dim = r.rank;
    let scale = 0.3 / (dim as f64).sqrt();
    let chains = n.div_ceil(MCMC_CHAIN_LEN);
    let parts = rng::replicate(chains, seed, |c, rng| {
        let len = MCMC_CHAIN_LEN.min(n - c * MCMC_CHAIN_LEN);
        let mut x: Vec<T> = mcmc_start(r).into_iter().map(T::of).collect();
        let mut lp = log_target(r, &x);
        let mut accepted = 0usize;
        let mut proposed = 0usize;
        let mut out = Vec::with_capacity(len);
        let total = MCMC_BURN_IN + len * MCMC_THIN;
        for step in 1..=total {
            let y: Vec<T> = x
                .iter()
                .map(|&v| v + T::of(scale * rng.sample::<f64, _>(StandardNormal)))
                .collect();
            proposed += 1;
            if r.is_interior(&y) {
                let ly = log_target(r, &y);
                if ly >= lp || rng.random::<f64>() < (ly - lp).exp() {
                    x = y;
                    lp = ly;
                    accepted += 1;
                }
            }
            if step > MCMC_BURN_IN && (step - MCMC_BURN_IN) % MCMC_THIN == 0 {
                out.push(x.clone());
            }
        }
        (out, accepted, proposed)
    });
    let mut points = Vec::with_capacity(n);
    let (mut acc, mut prop) = (0usize, 0usize);
    for (p, a, q) in parts {
        points.extend(p);
        acc += a;
        prop += q;
    }
    Ok(StaticSample {
        points,
        beta: r.beta,
        sampler_tag: SamplerTag::Mcmc,
        acceptance_rate: Some(acc as f64 / prop as f64),
    })
}
