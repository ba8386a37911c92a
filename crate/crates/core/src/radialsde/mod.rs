//! The radial Dunkl process: Euler–Maruyama paths in the Weyl chamber and
//! exact draws from the time-one law started at the origin.

pub(crate) mod sampler;

pub use sampler::{
    calibration_target, sample_static, sample_static_with, second_moment, Backend, SamplerTag,
    StaticSample, MCMC_BURN_IN, MCMC_THIN,
};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DunklError, Result};
use crate::rng::{self, StreamRng};
use crate::rootsys::RootSystem;
use crate::scalar::Real;

/// Halvings allowed before a step that keeps leaving the chamber is an error.
pub const MAX_HALVINGS: u32 = 20;

/// `dt = 1e-4 * min(1, 1/beta)`
pub fn default_dt(beta: f64) -> f64 {
    1e-4 * (1.0f64).min(1.0 / beta)
}

/// `(beta/2) sum_alpha k(alpha) alpha / (alpha.x)`, the drift `-grad(Phi)/2`
/// with `Phi = -log w_beta`.
pub fn drift<T: Real>(r: &RootSystem<T>, x: &[T]) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); x.len()];
    drift_into(r, x, &mut out)?;
    Ok(out)
}

pub(crate) fn drift_into<T: Real>(r: &RootSystem<T>, x: &[T], out: &mut [T]) -> Result<()> {
    let half_beta = r.beta / T::of(2.0);
    out.iter_mut().for_each(|v| *v = T::zero());
    for (id, root) in r.positive_roots.iter().enumerate() {
        let d = root.dot(x);
        if d == T::zero() {
            return Err(DunklError::Wall { root: id });
        }
        let c = half_beta * root.k / d;
        for &code in &root.code {
            let idx = code.unsigned_abs() as usize - 1;
            if code > 0 {
                out[idx] += c;
            } else {
                out[idx] -= c;
            }
        }
    }
    Ok(())
}

/// A saved radial trajectory.
#[derive(Debug, Clone)]
pub struct RadialPath<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub beta: T,
    pub x0: Vec<T>,
}

/// Euler–Maruyama with Brownian-bridge refinement: a step that would leave
/// the open chamber is split in two halves whose increments are conditioned
/// on the original one.
#[derive(Debug, Clone)]
pub struct EulerStepper<'a, T: Real> {
    pub system: &'a RootSystem<T>,
    pub max_halvings: u32,
    drift: Vec<T>,
    dw: Vec<T>,
    next: Vec<T>,
}

impl<'a, T: Real> EulerStepper<'a, T> {
    pub fn new(system: &'a RootSystem<T>) -> Self {
        let n = system.rank;
        EulerStepper {
            system,
            max_halvings: MAX_HALVINGS,
            drift: vec![T::zero(); n],
            dw: vec![T::zero(); n],
            next: vec![T::zero(); n],
        }
    }

    /// Writes the Euler update into `self.next`; true if it stays interior.
    fn try_step(&mut self, x: &[T], h: T, dw: &[T]) -> bool {
        if drift_into(self.system, x, &mut self.drift).is_err() {
            return false;
        }
        for i in 0..x.len() {
            self.next[i] = x[i] + self.drift[i] * h + dw[i];
        }
        self.system.is_interior(&self.next)
    }

    /// Advances `x` by `h` with a fresh Gaussian increment.
    pub fn step(&mut self, x: &mut [T], t: T, h: T, rng: &mut StreamRng) -> Result<()> {
        let sh = h.sqrt();
        for w in self.dw.iter_mut() {
            *w = T::of(rng.sample::<f64, _>(StandardNormal)) * sh;
        }
        let dw = std::mem::take(&mut self.dw);
        let res = self.refine(x, t, h, &dw, 0, rng);
        self.dw = dw;
        res
    }

    fn refine(
        &mut self,
        x: &mut [T],
        t: T,
        h: T,
        dw: &[T],
        depth: u32,
        rng: &mut StreamRng,
    ) -> Result<()> {
        if self.try_step(x, h, dw) {
            x.copy_from_slice(&self.next);
            return Ok(());
        }
        if depth >= self.max_halvings {
            return Err(DunklError::Step {
                t: t.as_f64(),
                halvings: depth,
            });
        }
        let half = h / T::of(2.0);
        let bridge_sd = (h / T::of(4.0)).sqrt();
        let dw1: Vec<T> = dw
            .iter()
            .map(|&w| w / T::of(2.0) + T::of(rng.sample::<f64, _>(StandardNormal)) * bridge_sd)
            .collect();
        let dw2: Vec<T> = dw.iter().zip(&dw1).map(|(&w, &w1)| w - w1).collect();
        self.refine(x, t, half, &dw1, depth + 1, rng)?;
        self.refine(x, t + half, half, &dw2, depth + 1, rng)
    }

    /// Runs from `(t0, x)` to `t1` with nominal step `dt`, calling `visit`
    /// after every step with the new time and state.
    pub fn run<F: FnMut(T, &[T])>(
        &mut self,
        x: &mut [T],
        t0: T,
        t1: T,
        dt: T,
        rng: &mut StreamRng,
        mut visit: F,
    ) -> Result<()> {
        let mut t = t0;
        while t < t1 {
            let h = if t + dt >= t1 { t1 - t } else { dt };
            self.step(x, t, h, rng)?;
            t = if t + dt >= t1 { t1 } else { t + dt };
            visit(t, x);
        }
        Ok(())
    }
}

fn check_start<T: Real>(r: &RootSystem<T>, x0: &[T]) -> Result<()> {
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
    Ok(())
}

/// Simulates `X̂` on `[0, t_end]` from `x0`, saving every step.
pub fn simulate_radial<T: Real>(
    r: &RootSystem<T>,
    x0: &[T],
    t_end: T,
    dt: T,
    seed: u64,
) -> Result<RadialPath<T>> {
    simulate_radial_strided(r, x0, t_end, dt, seed, 1)
}

/// As [`simulate_radial`], saving every `stride`-th step and the final state.
pub fn simulate_radial_strided<T: Real>(
    r: &RootSystem<T>,
    x0: &[T],
    t_end: T,
    dt: T,
    seed: u64,
    stride: usize,
) -> Result<RadialPath<T>> {
    if !(dt > T::zero()) || t_end < T::zero() {
        return Err(DunklError::InvalidArgument("need dt > 0 and T >= 0".into()));
    }
    let mut path = RadialPath {
        times: vec![T::zero()],
        states: vec![x0.to_vec()],
        beta: r.beta,
        x0: x0.to_vec(),
    };
    if t_end == T::zero() {
        return Ok(path);
    }
    check_start(r, x0)?;
    let stride = stride.max(1);
    let mut rng = rng::stream(seed, 0);
    let mut x = x0.to_vec();
    let mut count = 0usize;
    EulerStepper::new(r).run(&mut x, T::zero(), t_end, dt, &mut rng, |t, s| {
        count += 1;
        if count % stride == 0 || t == t_end {
            path.times.push(t);
            path.states.push(s.to_vec());
        }
    })?;
    Ok(path)
}

/// Time at which simulations that conceptually start at the origin begin;
/// the state there is an exact static draw scaled by `sqrt(t_start)`.
pub const ORIGIN_START_FRACTION: f64 = 1e-2;

/// One draw of `X̂(t_end)` given `X̂(0) = y`. A zero start is replaced by an
/// exact draw at `ORIGIN_START_FRACTION * t_end`.
pub(crate) fn terminal_state<T: Real>(
    r: &RootSystem<T>,
    y: &[T],
    t_end: T,
    dt: T,
    rng: &mut StreamRng,
) -> Result<Vec<T>> {
    let (mut x, t0) = if y.iter().all(|&v| v == T::zero()) {
        let t0 = t_end * T::of(ORIGIN_START_FRACTION);
        let p = sampler::draw_one(r, rng)?;
        (p.into_iter().map(|v| v * t0.sqrt()).collect::<Vec<T>>(), t0)
    } else {
        check_start(r, y)?;
        (y.to_vec(), T::zero())
    };
    EulerStepper::new(r).run(&mut x, t0, t_end, dt, rng, |_, _| {})?;
    Ok(x)
}

/// Independent terminal states for `replicas` replicas, in replica order.
pub fn radial_ensemble<T: Real>(
    r: &RootSystem<T>,
    y: &[T],
    t_end: T,
    replicas: usize,
    dt: T,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    rng::replicate(replicas, seed, |_, rng| {
        terminal_state(r, y, t_end, dt, rng)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootsys::{build_root_system, Family, Multiplicities};

    fn sys(f: Family, n: usize, beta: f64) -> RootSystem<f64> {
        build_root_system(f, n, beta, &Multiplicities::unit()).unwrap()
    }

    #[test]
    fn drift_examples() {
        let r = sys(Family::A, 2, 4.0);
        assert_eq!(drift(&r, &[-1.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        let r = sys(Family::A, 3, 3.0);
        let c = 0.7;
        let d = drift(&r, &[-c, 0.0, c]).unwrap();
        assert!((d[0] + d[2]).abs() < 1e-15 && d[1].abs() < 1e-15);
        assert!(d.iter().sum::<f64>().abs() < 1e-14);
        assert!(matches!(
            drift(&r, &[1.0, 1.0, 2.0]),
            Err(DunklError::Wall { root: 0 })
        ));
    }

    #[test]
    fn drift_sums_to_zero_for_a() {
        let r = sys(Family::A, 5, 2.5);
        let d = drift(&r, &[-2.0, -0.5, 0.1, 0.9, 3.0]).unwrap();
        assert!(d.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn zero_horizon_path() {
        let r = sys(Family::A, 2, 4.0);
        let p = simulate_radial(&r, &[-0.5, 0.5], 0.0, 1e-3, 1).unwrap();
        assert_eq!(p.times, vec![0.0]);
        assert_eq!(p.states, vec![vec![-0.5, 0.5]]);
    }

    #[test]
    fn paths_stay_interior_and_reproduce() {
        let r = sys(Family::B, 3, 2.0);
        let x0 = [0.2, 0.5, 0.9];
        let p = simulate_radial(&r, &x0, 0.5, 1e-3, 11).unwrap();
        let q = simulate_radial(&r, &x0, 0.5, 1e-3, 11).unwrap();
        assert_eq!(p.states, q.states);
        assert_eq!(*p.times.last().unwrap(), 0.5);
        for w in p.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        for s in &p.states {
            assert!(r.is_interior(s));
        }
    }

    #[test]
    fn strided_saves_final_state() {
        let r = sys(Family::A, 3, 4.0);
        let p = simulate_radial_strided(&r, &[-1.0, 0.0, 1.0], 0.0105, 1e-3, 5, 4).unwrap();
        assert_eq!(*p.times.last().unwrap(), 0.0105);
        assert_eq!(p.times.len(), 1 + 2 + 1);
    }

    #[test]
    fn wall_start_is_rejected() {
        let r = sys(Family::A, 2, 4.0);
        assert!(matches!(
            simulate_radial(&r, &[0.0, 0.0], 1.0, 1e-3, 1),
            Err(DunklError::Wall { .. })
        ));
    }

    #[test]
    fn single_precision_path() {
        let r = build_root_system::<f32>(Family::A, 2, 4.0, &Multiplicities::unit()).unwrap();
        let p = simulate_radial(&r, &[-0.5f32, 0.5], 0.1, 1e-3, 3).unwrap();
        assert!(p.states.iter().all(|s| s[1] > s[0]));
    }
}
