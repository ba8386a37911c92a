//! The full Dunkl process as the skew product `X(t) = ρ(t) X̂(t)`: the
//! radial diffusion drives a jump chain on the Weyl group whose rate of
//! jumping along `α` is the Lévy-kernel integrand at `X̂(t)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DunklError, Result};
use crate::jumprates::{estimate_rates_from, rate_integrand, total_rate_closed_form, RateTable};
use crate::radialsde::{sampler, EulerStepper, RadialPath};
use crate::rng::{self, StreamRng};
use crate::rootsys::{build_root_system, Family, Multiplicities, RootSystem};
use crate::scalar::Real;
use crate::stats::{dispersion_test, mean_se, poisson_gof, variance};
use crate::weylgroup::{act, checked_order, compose_signed, element_at, element_index};

/// Largest jump probability allowed in one substep.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    /// Positive-root id in chamber coordinates.
    pub root: usize,
    /// Group element index after the jump.
    pub group_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpTrajectory {
    pub x0: Vec<f64>,
    pub t_start: f64,
    pub t_final: f64,
    pub events: Vec<JumpEvent>,
}

impl JumpTrajectory {
    pub fn count(&self) -> usize {
        self.events.len()
    }

    /// Group index in force at time `t` (right-continuous).
    pub fn group_at(&self, t: f64) -> usize {
        self.events
            .iter()
            .take_while(|e| e.t <= t)
            .last()
            .map_or(0, |e| e.group_index)
    }

    /// Number of events in `(a, b]`.
    pub fn count_between(&self, a: f64, b: f64) -> usize {
        self.events.iter().filter(|e| e.t > a && e.t <= b).count()
    }
}

/// Cumulative jump counts on a time grid, one row per replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpCountRecord {
    pub times: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
}

impl JumpCountRecord {
    pub fn replicas(&self) -> usize {
        self.counts.len()
    }

    /// Per-replica counts in `(times[a], times[b]]`.
    pub fn increments(&self, a: usize, b: usize) -> Vec<u64> {
        self.counts.iter().map(|c| c[b] - c[a]).collect()
    }
}

/// The current Weyl group element, updated by right multiplication with
/// reflections. Needs no enumerated table, so it works for any rank whose
/// group order fits in `usize`.
struct GroupWalk {
    family: Family,
    perm: Vec<usize>,
    signs: Vec<i8>,
    reflections: Vec<(Vec<usize>, Vec<i8>)>,
}

impl GroupWalk {
    fn new<T: Real>(r: &RootSystem<T>) -> Result<Self> {
        if checked_order(r.family, r.rank).is_none() {
            return Err(DunklError::Size {
                order: usize::MAX,
                cap: usize::MAX,
            });
        }
        Ok(GroupWalk {
            family: r.family,
            perm: (0..r.rank).collect(),
            signs: vec![1; r.rank],
            reflections: r
                .positive_roots
                .iter()
                .map(|a| a.signed_permutation())
                .collect(),
        })
    }

    /// `ρ ← ρ ∘ σ_root`, returning the new index.
    fn apply(&mut self, root: usize) -> usize {
        let (p, s) = &self.reflections[root];
        let (perm, signs) = compose_signed((&self.perm, &self.signs), (p, s));
        self.perm = perm;
        self.signs = signs;
        element_index(self.family, &self.perm, &self.signs)
    }
}

/// Shared state of the coupled radial/jump stepping.
struct JumpDriver<'a, T: Real> {
    system: &'a RootSystem<T>,
    walk: GroupWalk,
    stepper: EulerStepper<'a, T>,
    weights: Vec<f64>,
}

impl<'a, T: Real> JumpDriver<'a, T> {
    fn new(system: &'a RootSystem<T>) -> Result<Self> {
        Ok(JumpDriver {
            system,
            walk: GroupWalk::new(system)?,
            stepper: EulerStepper::new(system),
            weights: vec![0.0; system.num_roots()],
        })
    }

    /// Advances `(x, rho)` over `[t, t + h]`: jumps are sampled with the
    /// rates frozen at the start of the step, then the radial part moves.
    fn step(
        &mut self,
        x: &mut Vec<T>,
        rho: &mut usize,
        t: f64,
        h: f64,
        rng: &mut StreamRng,
        events: &mut Vec<JumpEvent>,
    ) -> Result<()> {
        let mut total = 0.0;
        for (id, w) in self.weights.iter_mut().enumerate() {
            *w = rate_integrand(self.system, id, x)?.as_f64();
            total += *w;
        }
        let subs = ((total * h / MAX_JUMP_PROBABILITY).ceil() as usize).max(1);
        let hs = h / subs as f64;
        let p = -(-total * hs).exp_m1();
        for j in 0..subs {
            if rng.random::<f64>() < p {
                let mut u = rng.random::<f64>() * total;
                let mut root = self.weights.len() - 1;
                for (id, &w) in self.weights.iter().enumerate() {
                    if u < w {
                        root = id;
                        break;
                    }
                    u -= w;
                }
                *rho = self.walk.apply(root);
                events.push(JumpEvent {
                    t: t + (j as f64 + 1.0) * hs,
                    root,
                    group_index: *rho,
                });
            }
        }
        self.stepper.step(x, T::of(t), T::of(h), rng)
    }

    fn run<F: FnMut(f64, &[T], usize)>(
        &mut self,
        x: &mut Vec<T>,
        rho: &mut usize,
        t0: f64,
        t1: f64,
        dt: f64,
        rng: &mut StreamRng,
        events: &mut Vec<JumpEvent>,
        mut visit: F,
    ) -> Result<()> {
        let mut t = t0;
        while t < t1 {
            let last = t + dt >= t1;
            let h = if last { t1 - t } else { dt };
            self.step(x, rho, t, h, rng, events)?;
            t = if last { t1 } else { t + dt };
            visit(t, x, *rho);
        }
        Ok(())
    }
}

/// Simulates `X̂` and `ρ` on `[0, t_end]` from an interior start, saving
/// every `stride`-th radial state.
#[allow(clippy::too_many_arguments)]
pub fn simulate_dunkl<T: Real>(
    r: &RootSystem<T>,
    x0: &[T],
    t_end: f64,
    dt: f64,
    seed: u64,
    stride: usize,
) -> Result<(RadialPath<T>, JumpTrajectory)> {
    if x0.len() != r.rank {
        return Err(DunklError::Dimension(format!(
            "start has {} coordinates, rank {}",
            x0.len(),
            r.rank
        )));
    }
    if let Some(id) = r
        .positive_roots
        .iter()
        .position(|a| !(a.dot(x0) > T::zero()))
    {
        return Err(DunklError::Wall { root: id });
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(DunklError::InvalidArgument("need dt > 0 and T >= 0".into()));
    }
    let mut driver = JumpDriver::new(r)?;
    let mut rng = rng::stream(seed, 0);
    let mut path = RadialPath {
        times: vec![T::zero()],
        states: vec![x0.to_vec()],
        beta: r.beta,
        x0: x0.to_vec(),
    };
    let mut traj = JumpTrajectory {
        x0: x0.iter().map(|v| v.as_f64()).collect(),
        t_start: 0.0,
        t_final: t_end,
        events: Vec::new(),
    };
    let (mut x, mut rho) = (x0.to_vec(), 0usize);
    let stride = stride.max(1);
    let mut count = 0usize;
    let mut events = Vec::new();
    driver.run(
        &mut x,
        &mut rho,
        0.0,
        t_end,
        dt,
        &mut rng,
        &mut events,
        |t, s, _| {
            count += 1;
            if count % stride == 0 || t == t_end {
                path.times.push(T::of(t));
                path.states.push(s.to_vec());
            }
        },
    )?;
    traj.events = events;
    Ok((path, traj))
}

/// `X(t) = ρ(t) X̂(t)` at every saved radial time.
pub fn reconstruct<T: Real>(
    path: &RadialPath<T>,
    traj: &JumpTrajectory,
    family: Family,
) -> Vec<Vec<T>> {
    let n = traj.x0.len();
    let mut out = Vec::with_capacity(path.states.len());
    let mut next = 0;
    let mut rho = 0;
    for (t, x) in path.times.iter().zip(&path.states) {
        let t = t.as_f64();
        while next < traj.events.len() && traj.events[next].t <= t {
            rho = traj.events[next].group_index;
            next += 1;
        }
        out.push(act(&element_at(family, n, rho), x));
    }
    out
}

/// Cumulative counts on `times` for the process started at the origin.
/// `X̂(times[0])` is drawn exactly from the scaled static law, so counts are
/// measured from `times[0] > 0`.
pub fn jump_counts_from_origin<T: Real>(
    r: &RootSystem<T>,
    times: &[f64],
    replicas: usize,
    dt: f64,
    seed: u64,
) -> Result<JumpCountRecord> {
    if times.is_empty() || !(times[0] > 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(DunklError::InvalidArgument(
            "count grid must be nondecreasing and start above 0".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(DunklError::InvalidArgument("dt must be positive".into()));
    }
    JumpDriver::new(r)?;
    let rows: Vec<Result<Vec<u64>>> = rng::replicate(replicas, seed, |_, rng| {
        let mut driver = JumpDriver::new(r)?;
        let t0 = times[0];
        let mut x: Vec<T> = sampler::draw_one(r, rng)?
            .into_iter()
            .map(|v| v * T::of(t0.sqrt()))
            .collect();
        let mut rho = 0;
        let mut events = Vec::new();
        let mut row = vec![0u64; times.len()];
        for i in 1..times.len() {
            driver.run(
                &mut x,
                &mut rho,
                times[i - 1],
                times[i],
                dt,
                rng,
                &mut events,
                |_, _, _| {},
            )?;
            row[i] = events.len() as u64;
        }
        Ok(row)
    });
    Ok(JumpCountRecord {
        times: times.to_vec(),
        counts: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// Per-replica `∫_{t0}^{t1} Σ_α λ(α | X̂(s)) ds` for the process started at
/// the origin, by the trapezoid rule on the simulation grid. Given the radial
/// path the counts are Poisson with this mean, so the marginal count
/// variance is `E[I] + Var[I]`.
pub fn integrated_intensity_from_origin<T: Real>(
    r: &RootSystem<T>,
    t0: f64,
    t1: f64,
    replicas: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(t0 > 0.0) || t1 < t0 || !(dt > 0.0) {
        return Err(DunklError::InvalidArgument(
            "need 0 < t0 <= t1 and dt > 0".into(),
        ));
    }
    let total_at = |x: &[T]| -> Result<f64> {
        (0..r.num_roots())
            .map(|a| rate_integrand(r, a, x).map(|v| v.as_f64()))
            .sum()
    };
    rng::replicate(replicas, seed, |_, rng| {
        let mut x: Vec<T> = sampler::draw_one(r, rng)?
            .into_iter()
            .map(|v| v * T::of(t0.sqrt()))
            .collect();
        let mut stepper = EulerStepper::new(r);
        let (mut acc, mut prev, mut tp) = (0.0, total_at(&x)?, t0);
        let mut err = None;
        stepper.run(&mut x, T::of(t0), T::of(t1), T::of(dt), rng, |t, s| {
            if err.is_some() {
                return;
            }
            match total_at(s) {
                Ok(v) => {
                    let t = t.as_f64();
                    acc += 0.5 * (prev + v) * (t - tp);
                    prev = v;
                    tp = t;
                }
                Err(e) => err = Some(e),
            }
        })?;
        err.map_or(Ok(acc), Err)
    })
    .into_iter()
    .collect()
}

/// Count statistics on `(t0, t]` for each grid time `t > t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub t0: f64,
    pub t: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// `Λ(1|0) log(t/t0)`
    pub predicted: f64,
    pub dispersion_p: f64,
    pub gof_p: f64,
}

/// Compares windowed counts to the inhomogeneous-Poisson prediction for a
/// start at the origin. `rates` must be the origin table.
pub fn jump_count_stats(
    records: &JumpCountRecord,
    rates: &RateTable,
    t0: f64,
) -> Result<Vec<WindowStats>> {
    if !rates.is_at_origin() {
        return Err(DunklError::Mismatch(
            "count prediction needs the origin rate table".into(),
        ));
    }
    let a = records.times.iter().position(|&t| t == t0).ok_or_else(|| {
        DunklError::InvalidArgument(format!("t0 = {t0} is not on the count grid"))
    })?;
    let scale = rates.total * rates.t_ref;
    let mut out = Vec::new();
    for b in a + 1..records.times.len() {
        let inc = records.increments(a, b);
        let xs: Vec<f64> = inc.iter().map(|&c| c as f64).collect();
        let (mean, mean_se) = mean_se(&xs);
        let var = variance(&xs);
        let m4 = xs.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / xs.len() as f64;
        let variance_se = ((m4 - var * var).max(0.0) / xs.len() as f64).sqrt();
        let predicted = scale * (records.times[b] / t0).ln();
        let (_, dispersion_p) = dispersion_test(&xs);
        let (_, _, gof_p) = poisson_gof(&inc, predicted);
        out.push(WindowStats {
            t0,
            t: records.times[b],
            mean,
            mean_se,
            variance: var,
            variance_se,
            predicted,
            dispersion_p,
            gof_p,
        });
    }
    Ok(out)
}

/// How [`per_particle_rate`] evaluates `Λ_β(N | x0) / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PhaseMode {
    /// Start at the origin, closed form.
    ClosedForm,
    /// Monte Carlo from `x0` with radial simulations.
    Simulate {
        x0: Vec<f64>,
        replicas: usize,
        dt: f64,
        seed: u64,
    },
}

impl PhaseMode {
    pub fn name(&self) -> &'static str {
        match self {
            PhaseMode::ClosedForm => "closed_form",
            PhaseMode::Simulate { .. } => "simulate",
        }
    }
}

/// Bulk-limit constant `c_R`: 8 for type A, 4 for type B.
pub fn bulk_constant(family: Family) -> f64 {
    match family {
        Family::A => 8.0,
        Family::B => 4.0,
    }
}

/// `N → ∞` limit of the per-particle rate: `β / (c_R (β - 1))`.
pub fn per_particle_limit(family: Family, beta: f64) -> Result<f64> {
    if !(beta > 1.0) {
        return Err(DunklError::Regime(format!("beta = {beta} <= 1")));
    }
    Ok(beta / (bulk_constant(family) * (beta - 1.0)))
}

/// Total jump rate per particle at bulk time `t = N`, i.e. `Λ_β(1 | x0/√N) / N²`.
pub fn per_particle_rate(family: Family, n: usize, beta: f64, mode: &PhaseMode) -> Result<f64> {
    if !(beta > 1.0) {
        return Err(DunklError::Regime(format!(
            "beta = {beta} <= 1: per-particle rate diverges"
        )));
    }
    let r = build_root_system::<f64>(family, n, beta, &Multiplicities::unit())?;
    let n2 = (n * n) as f64;
    match mode {
        PhaseMode::ClosedForm => Ok(total_rate_closed_form(&r)? / n2),
        PhaseMode::Simulate {
            x0,
            replicas,
            dt,
            seed,
        } => {
            if x0.len() != n {
                return Err(DunklError::Dimension(format!(
                    "x0 has {} coordinates, N = {n}",
                    x0.len()
                )));
            }
            let y: Vec<f64> = x0.iter().map(|v| v / (n as f64).sqrt()).collect();
            Ok(estimate_rates_from(&r, &y, 1.0, *replicas, *dt, *seed)?.total / n2)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    pub rate_per_particle: f64,
    pub theory: f64,
    pub mode: String,
}

/// Per-particle rates over `ns`. `x0_for(n)` supplies the start for the
/// simulate mode.
pub fn phase_sweep(
    family: Family,
    ns: &[usize],
    beta: f64,
    simulate: Option<(&dyn Fn(usize) -> Vec<f64>, usize, f64, u64)>,
) -> Result<Vec<PhaseRow>> {
    let theory = per_particle_limit(family, beta)?;
    ns.iter()
        .map(|&n| {
            let mode = match simulate {
                None => PhaseMode::ClosedForm,
                Some((x0_for, replicas, dt, seed)) => PhaseMode::Simulate {
                    x0: x0_for(n),
                    replicas,
                    dt,
                    seed: rng::derive_seed(seed, &n.to_string()),
                },
            };
            Ok(PhaseRow {
                n,
                beta,
                rate_per_particle: per_particle_rate(family, n, beta, &mode)?,
                theory,
                mode: mode.name().to_string(),
            })
        })
        .collect()
}

/// Centered, unit-spaced start in the open chamber: `i - (N-1)/2` for A
/// and `i + 1` for B.
pub fn unit_spaced_start(family: Family, n: usize) -> Vec<f64> {
    match family {
        Family::A => (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect(),
        Family::B => (0..n).map(|i| i as f64 + 1.0).collect(),
    }
}

/// [`unit_spaced_start`] scaled to norm `radius`.
pub fn spread_start(family: Family, n: usize, radius: f64) -> Vec<f64> {
    let raw = unit_spaced_start(family, n);
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| v * radius / norm).collect()
}
