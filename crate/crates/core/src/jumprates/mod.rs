//! Per-root jump rates `λ_β(t, α | x0)` and their total.
//!
//! The rate of jumps along `α` at time one is the expectation of
//! `(β/2) k(α) (|α|²/2) / (α·X̂)²` under the radial law. The total at the
//! origin has a closed form for unit multiplicities; individual rates are
//! estimated by Monte Carlo.

mod cache;

use serde::{Deserialize, Serialize};

use crate::error::{DunklError, Result};
use crate::radialsde::{radial_ensemble, sample_static, SamplerTag};
use crate::rng::derive_seed;
use crate::rootsys::{Family, Multiplicities, RootSystem, SystemSpec};
use crate::scalar::{norm_sq, Real};
use crate::stats::mean_se;

pub use cache::{request_key, RateCache, CACHE_DIR_ENV};

/// Where a rate table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateSampler {
    Tridiagonal,
    Mcmc,
    Sde,
    Frozen,
    Exact,
}

impl From<SamplerTag> for RateSampler {
    fn from(t: SamplerTag) -> Self {
        match t {
            SamplerTag::Tridiagonal => RateSampler::Tridiagonal,
            SamplerTag::Mcmc => RateSampler::Mcmc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    /// Signed 1-based coordinate code of the root, see [`crate::rootsys::Root`].
    pub root: Vec<i32>,
    pub lambda: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Rates out of the start point `origin` at reference time `t_ref`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub system: Family,
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    pub k: Multiplicities,
    pub origin: Vec<f64>,
    pub t_ref: f64,
    pub entries: Vec<RateEntry>,
    /// Sum of the entry rates.
    pub total: f64,
    /// Standard error of the total, from per-sample totals.
    #[serde(default)]
    pub total_stderr: f64,
    pub total_closed_form: Option<f64>,
    pub sampler_tag: RateSampler,
    pub seed: Option<u64>,
    /// Set when some `β k(α) <= 3`: the estimator has infinite variance and
    /// its standard errors are not trustworthy.
    #[serde(default)]
    pub variance_warning: bool,
}

impl RateTable {
    /// Table with known rates (no sampling error).
    pub fn from_exact<T: Real>(r: &RootSystem<T>, lambdas: &[f64], tag: RateSampler) -> Self {
        let entries = r
            .positive_roots
            .iter()
            .zip(lambdas)
            .map(|(root, &l)| RateEntry {
                root: root.code.clone(),
                lambda: l,
                stderr: 0.0,
                n: 0,
            })
            .collect();
        RateTable {
            system: r.family,
            n: r.rank,
            beta: r.beta.as_f64(),
            k: r.multiplicities.clone(),
            origin: vec![0.0; r.rank],
            t_ref: 1.0,
            entries,
            total: lambdas.iter().sum(),
            total_stderr: 0.0,
            total_closed_form: total_rate_closed_form(r).ok().map(|v| v.as_f64()),
            sampler_tag: tag,
            seed: None,
            variance_warning: false,
        }
    }

    pub fn spec(&self) -> SystemSpec {
        SystemSpec {
            family: self.system,
            n: self.n,
            beta: self.beta,
            k: self.k.clone(),
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn stderrs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.stderr).collect()
    }

    pub fn is_at_origin(&self) -> bool {
        self.origin.iter().all(|&v| v == 0.0)
    }

    /// Checks positivity and the summation invariant.
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self
            .entries
            .iter()
            .find(|e| !(e.lambda > 0.0) || !e.lambda.is_finite())
        {
            return Err(DunklError::Mismatch(format!(
                "non-positive rate {} for {:?}",
                e.lambda, e.root
            )));
        }
        let sum: f64 = self.lambdas().iter().sum();
        if sum != self.total {
            return Err(DunklError::Mismatch(format!(
                "total {} differs from sum {}",
                self.total, sum
            )));
        }
        Ok(())
    }
}

/// `(β/2) k(α) (|α|²/2) / (α·x)²`
pub fn rate_integrand<T: Real>(r: &RootSystem<T>, root: usize, x: &[T]) -> Result<T> {
    let a = &r.positive_roots[root];
    let d = a.dot(x);
    if d == T::zero() {
        return Err(DunklError::Wall { root });
    }
    Ok(r.beta * a.k * a.norm_sq / (T::of(4.0) * d * d))
}

/// `Λ_β(1|0) = β |R_+| / (4 (β - 1))` for unit multiplicities.
pub fn total_rate_closed_form<T: Real>(r: &RootSystem<T>) -> Result<T> {
    if !(r.beta > T::one()) {
        return Err(DunklError::Regime(format!(
            "beta = {} <= 1: total rate diverges",
            r.beta.as_f64()
        )));
    }
    if !r.has_unit_multiplicities() {
        return Err(DunklError::UnsupportedMultiplicity);
    }
    Ok(r.beta * T::of_usize(r.num_roots()) / (T::of(4.0) * (r.beta - T::one())))
}

/// `β→∞` limit of the closed-form total: `|R_+| / 4`.
pub fn frozen_total_rate(num_roots: usize) -> f64 {
    num_roots as f64 / 4.0
}

fn variance_warning<T: Real>(r: &RootSystem<T>) -> bool {
    r.positive_roots
        .iter()
        .any(|a| (r.beta * a.k).as_f64() <= 3.0)
}

/// Averages the integrand over `points`, per root and for the total.
fn table_from_points<T: Real>(
    r: &RootSystem<T>,
    points: &[Vec<T>],
    origin: Vec<f64>,
    t_ref: f64,
    tag: RateSampler,
    seed: u64,
) -> Result<RateTable> {
    if let Some(a) = r
        .positive_roots
        .iter()
        .find(|a| (r.beta * a.k).as_f64() <= 1.0)
    {
        return Err(DunklError::Regime(format!(
            "beta * k = {} <= 1 on {}: the rate expectation diverges",
            (r.beta * a.k).as_f64(),
            a.label()
        )));
    }
    let nr = r.num_roots();
    let mut per_root: Vec<Vec<f64>> = vec![Vec::with_capacity(points.len()); nr];
    let mut totals = Vec::with_capacity(points.len());
    for p in points {
        let mut tot = 0.0;
        for (id, col) in per_root.iter_mut().enumerate() {
            let v = rate_integrand(r, id, p)?.as_f64();
            col.push(v);
            tot += v;
        }
        totals.push(tot);
    }
    let entries: Vec<RateEntry> = r
        .positive_roots
        .iter()
        .zip(&per_root)
        .map(|(root, col)| {
            let (m, se) = mean_se(col);
            RateEntry {
                root: root.code.clone(),
                lambda: m,
                stderr: se,
                n: col.len(),
            }
        })
        .collect();
    let total = entries.iter().map(|e| e.lambda).sum();
    let (_, total_stderr) = mean_se(&totals);
    let warn = variance_warning(r);
    if warn {
        log::warn!("beta*k <= 3 on some root: rate estimator has infinite variance");
    }
    Ok(RateTable {
        system: r.family,
        n: r.rank,
        beta: r.beta.as_f64(),
        k: r.multiplicities.clone(),
        origin,
        t_ref,
        entries,
        total,
        total_stderr,
        total_closed_form: None,
        sampler_tag: tag,
        seed: Some(seed),
        variance_warning: warn,
    })
}

/// `λ_β(1, α | 0)` by Monte Carlo over exact draws of `X̂(1)`.
pub fn estimate_rates_origin<T: Real>(
    r: &RootSystem<T>,
    nsamples: usize,
    seed: u64,
) -> Result<RateTable> {
    let sample = sample_static(r, nsamples, derive_seed(seed, "rates-origin"))?;
    let mut table = table_from_points(
        r,
        &sample.points,
        vec![0.0; r.rank],
        1.0,
        sample.sampler_tag.into(),
        seed,
    )?;
    table.total_closed_form = total_rate_closed_form(r).ok().map(|v| v.as_f64());
    Ok(table)
}

/// `λ_β(t_ref, α | y)` by Monte Carlo over simulated radial paths from `y`.
pub fn estimate_rates_from<T: Real>(
    r: &RootSystem<T>,
    y: &[T],
    t_ref: T,
    nreplicas: usize,
    dt: T,
    seed: u64,
) -> Result<RateTable> {
    let states = radial_ensemble(r, y, t_ref, nreplicas, dt, derive_seed(seed, "rates-from"))?;
    table_from_points(
        r,
        &states,
        y.iter().map(|v| v.as_f64()).collect(),
        t_ref.as_f64(),
        RateSampler::Sde,
        seed,
    )
}

/// Rates at time `t` from `x0`, using `λ(t, α|x0) = (t_ref/t) λ(t_ref, α|y)`
/// whenever `x0/√t = y/√t_ref`. Only exact matches are served; use
/// [`RayRates`] for interpolation along a ray.
pub fn rate_at_time(table: &RateTable, t: f64, x0: &[f64]) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(DunklError::InvalidArgument(format!(
            "t must be positive, got {t}"
        )));
    }
    let scaled: Vec<f64> = x0.iter().map(|v| v / t.sqrt()).collect();
    let target: Vec<f64> = table
        .origin
        .iter()
        .map(|v| v / table.t_ref.sqrt())
        .collect();
    let diff = scaled
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = norm_sq(&target).sqrt().max(1e-300);
    if scaled.len() != target.len() || (diff > 1e-12 * scale && diff > 0.0) {
        let s = norm_sq(&scaled).sqrt();
        return Err(DunklError::Extrapolation {
            s,
            min: norm_sq(&target).sqrt(),
            max: norm_sq(&target).sqrt(),
        });
    }
    let factor = table.t_ref / t;
    Ok(table.entries.iter().map(|e| e.lambda * factor).collect())
}

/// Rate tables at `t_ref = 1` along the ray `y = s u`, used to serve
/// `λ(t, α | x0)` for `x0 = |x0| u` at any `t` with `|x0|/√t` on the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayRates {
    /// Unit direction `u`.
    pub direction: Vec<f64>,
    /// Ascending grid; `s[0] = 0` is the origin table.
    pub s: Vec<f64>,
    pub tables: Vec<RateTable>,
}

/// Geometric grid `s_min, ..., s_max` with `points` entries, preceded by 0.
pub fn ray_grid(s_min: f64, s_max: f64, points: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    if points == 1 {
        g.push(s_min);
        return g;
    }
    let ratio = (s_max / s_min).powf(1.0 / (points - 1) as f64);
    g.extend((0..points).map(|i| s_min * ratio.powi(i as i32)));
    g
}

impl RayRates {
    /// Estimates the origin table with exact draws and the remaining grid
    /// points with radial simulations.
    pub fn estimate<T: Real>(
        r: &RootSystem<T>,
        direction: &[f64],
        s_grid: &[f64],
        nsamples: usize,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        if s_grid.first() != Some(&0.0) || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DunklError::InvalidArgument(
                "ray grid must start at 0 and increase".into(),
            ));
        }
        let norm = norm_sq(direction).sqrt();
        let u: Vec<f64> = direction.iter().map(|v| v / norm).collect();
        let mut tables = vec![estimate_rates_origin(r, nsamples, seed)?];
        for (i, &s) in s_grid.iter().enumerate().skip(1) {
            let y: Vec<T> = u.iter().map(|&v| T::of(v * s)).collect();
            tables.push(estimate_rates_from(
                r,
                &y,
                T::one(),
                nsamples,
                T::of(dt),
                seed.wrapping_add(i as u64),
            )?);
        }
        Ok(RayRates {
            direction: u,
            s: s_grid.to_vec(),
            tables,
        })
    }

    /// `λ_β(t, α | x0)`; interpolates `log λ` linearly in `log s` between
    /// grid points and linearly in `s²` between the origin and the first
    /// positive grid point.
    pub fn rate_at_time(&self, t: f64, x0: &[f64]) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(DunklError::InvalidArgument(format!(
                "t must be positive, got {t}"
            )));
        }
        let nx = norm_sq(x0).sqrt();
        if nx > 0.0 {
            let cos = x0
                .iter()
                .zip(&self.direction)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / nx;
            if (cos - 1.0).abs() > 1e-9 {
                return Err(DunklError::Mismatch("x0 is not on the cached ray".into()));
            }
        }
        let s = nx / t.sqrt();
        let smax = *self.s.last().unwrap();
        if s > smax {
            return Err(DunklError::Extrapolation {
                s,
                min: 0.0,
                max: smax,
            });
        }
        let hi = self.s.iter().position(|&g| g >= s).unwrap();
        let rates: Vec<f64> = if self.s[hi] == s {
            self.tables[hi].lambdas()
        } else {
            let lo = hi - 1;
            let (a, b) = (&self.tables[lo], &self.tables[hi]);
            let w = if lo == 0 {
                (s * s) / (self.s[hi] * self.s[hi])
            } else {
                (s.ln() - self.s[lo].ln()) / (self.s[hi].ln() - self.s[lo].ln())
            };
            a.entries
                .iter()
                .zip(&b.entries)
                .map(|(ea, eb)| {
                    if lo == 0 {
                        ea.lambda + w * (eb.lambda - ea.lambda)
                    } else {
                        (ea.lambda.ln() + w * (eb.lambda.ln() - ea.lambda.ln())).exp()
                    }
                })
                .collect()
        };
        Ok(rates.into_iter().map(|l| l / t).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootsys::{build_root_system, Family, Multiplicities};

    fn sys(f: Family, n: usize, beta: f64) -> RootSystem<f64> {
        build_root_system(f, n, beta, &Multiplicities::unit()).unwrap()
    }

    #[test]
    fn integrand_examples() {
        let r = sys(Family::A, 2, 4.0);
        assert_eq!(rate_integrand(&r, 0, &[-1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(rate_integrand(&r, 0, &[-2.0, 2.0]).unwrap(), 0.125);
        assert!(matches!(
            rate_integrand(&r, 0, &[1.0, 1.0]),
            Err(DunklError::Wall { root: 0 })
        ));
    }

    #[test]
    fn integrand_at_scaled_peak_is_frozen_rate() {
        // A, N=3 peak vector: Hermite-3 zeros.
        let z = [-(1.5f64).sqrt(), 0.0, 1.5f64.sqrt()];
        for beta in [4.0, 64.0, 1e6] {
            let r = sys(Family::A, 3, beta);
            let x: Vec<f64> = z.iter().map(|v| v * beta.sqrt()).collect();
            let got: Vec<f64> = (0..3).map(|a| rate_integrand(&r, a, &x).unwrap()).collect();
            let want = [1.0 / 3.0, 1.0 / 12.0, 1.0 / 3.0];
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let v = total_rate_closed_form(&sys(Family::A, 10, 8.0)).unwrap();
        assert!((v - 90.0 / 7.0).abs() < 1e-13);
        assert_eq!(
            total_rate_closed_form(&sys(Family::B, 2, 2.0)).unwrap(),
            2.0
        );
        let big = total_rate_closed_form(&sys(Family::A, 4, 1e9)).unwrap();
        assert!((big - frozen_total_rate(6)).abs() < 1e-8);
        let near = total_rate_closed_form(&sys(Family::A, 4, 1.0 + 1e-9)).unwrap();
        assert!(near > 1e8);
        let k = Multiplicities::unit().with(crate::rootsys::Orbit::Short, 2.0);
        let r = build_root_system::<f64>(Family::B, 2, 2.0, &k).unwrap();
        assert!(matches!(
            total_rate_closed_form(&r),
            Err(DunklError::UnsupportedMultiplicity)
        ));
    }

    #[test]
    fn origin_estimate_two_particles() {
        let r = sys(Family::A, 2, 4.0);
        let t = estimate_rates_origin(&r, 400_000, 3).unwrap();
        t.validate().unwrap();
        assert!(!t.variance_warning);
        let l = t.entries[0].lambda;
        assert!((l - 1.0 / 3.0).abs() < 4.0 * t.entries[0].stderr, "{l}");
        assert_eq!(t.total_closed_form, Some(1.0 / 3.0));
        assert_eq!(t.entries[0].root, vec![2, -1]);
    }

    #[test]
    fn mirror_roots_agree() {
        let r = sys(Family::A, 3, 8.0);
        let t = estimate_rates_origin(&r, 400_000, 5).unwrap();
        // e2-e1 and e3-e2 are exchanged by x -> -reverse(x).
        let (a, b) = (&t.entries[0], &t.entries[2]);
        let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!((a.lambda - b.lambda).abs() < 3.0 * se);
        assert!((t.total - 6.0 / 7.0).abs() < 3.0 * t.total_stderr);
    }

    #[test]
    fn divergent_regime_is_rejected() {
        let r = build_root_system(Family::A, 2, 1.0, &Multiplicities::unit());
        assert!(matches!(r, Err(DunklError::Regime(_))));
    }

    #[test]
    fn variance_warning_is_flagged() {
        let r = sys(Family::A, 2, 2.0);
        assert!(estimate_rates_origin(&r, 1000, 1).unwrap().variance_warning);
    }

    #[test]
    fn origin_scaling_is_exact() {
        let r = sys(Family::A, 3, 8.0);
        let t = estimate_rates_origin(&r, 10_000, 1).unwrap();
        let zero = [0.0; 3];
        assert_eq!(rate_at_time(&t, 1.0, &zero).unwrap(), t.lambdas());
        let quarter = rate_at_time(&t, 4.0, &zero).unwrap();
        for (q, l) in quarter.iter().zip(t.lambdas()) {
            assert_eq!(*q, l / 4.0);
            assert_eq!(q * 4.0, l);
        }
        for time in [0.3, 7.0, 1234.5] {
            for (q, l) in rate_at_time(&t, time, &zero)
                .unwrap()
                .iter()
                .zip(t.lambdas())
            {
                assert!((q * time - l).abs() <= 4.0 * f64::EPSILON * l);
            }
        }
        assert!(matches!(
            rate_at_time(&t, 2.0, &[0.0, 0.0, 1.0]),
            Err(DunklError::Extrapolation { .. })
        ));
    }

    #[test]
    fn scaling_consistency_off_origin() {
        let r = sys(Family::A, 2, 4.0);
        let y = [-1.0, 1.0];
        let half: Vec<f64> = y.iter().map(|v| v / 2.0).collect();
        let t = estimate_rates_from(&r, &half, 1.0, 200, 1e-3, 2).unwrap();
        let at4 = rate_at_time(&t, 4.0, &y).unwrap();
        assert_eq!(at4[0], t.entries[0].lambda / 4.0);
    }

    #[test]
    fn ray_interpolation_hits_grid_and_origin_limit() {
        let r = sys(Family::A, 2, 4.0);
        let grid = ray_grid(0.25, 1.0, 3);
        assert_eq!(grid.len(), 4);
        assert!((grid[2] - 0.5).abs() < 1e-15);
        let ray = RayRates::estimate(&r, &[-1.0, 1.0], &grid, 2000, 1e-3, 1).unwrap();
        let u = &ray.direction;
        // On a grid point at t = 1.
        let x0: Vec<f64> = u.iter().map(|v| v * 0.5).collect();
        let got = ray.rate_at_time(1.0, &x0).unwrap();
        assert!((got[0] - ray.tables[2].entries[0].lambda).abs() < 1e-15);
        // t -> infinity recovers the origin table times 1/t.
        let x0: Vec<f64> = u.iter().map(|v| v * 1.0).collect();
        let t = 1e8;
        let got = ray.rate_at_time(t, &x0).unwrap();
        assert!((got[0] * t - ray.tables[0].entries[0].lambda).abs() < 1e-6);
        // Beyond the grid.
        assert!(matches!(
            ray.rate_at_time(0.5, &x0),
            Err(DunklError::Extrapolation { .. })
        ));
    }
}
