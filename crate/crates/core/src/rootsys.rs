//! Root systems of type `A_{N-1}` and `B_N` with per-orbit multiplicities.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DunklError, Result};
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::A => f.write_str("A"),
            Family::B => f.write_str("B"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = DunklError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Family::A),
            "B" | "b" => Ok(Family::B),
            other => Err(DunklError::InvalidArgument(format!(
                "unknown family {other:?}"
            ))),
        }
    }
}

/// Orbit of a root under the Weyl group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orbit {
    /// The single orbit of `A_{N-1}`.
    A,
    /// `e_i` in `B_N`.
    Short,
    /// `e_j ± e_i` in `B_N`.
    Long,
}

impl Family {
    pub fn orbits(self) -> &'static [Orbit] {
        match self {
            Family::A => &[Orbit::A],
            Family::B => &[Orbit::Short, Orbit::Long],
        }
    }

    /// Order of the Weyl group of rank `n`.
    pub fn group_order(self, n: usize) -> usize {
        let fact: usize = (1..=n).product();
        match self {
            Family::A => fact,
            Family::B => fact << n,
        }
    }

    /// Number of positive roots.
    pub fn num_positive_roots(self, n: usize) -> usize {
        match self {
            Family::A => n * (n.saturating_sub(1)) / 2,
            Family::B => n * n,
        }
    }
}

/// Multiplicity per orbit; missing orbits default to 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Multiplicities(pub BTreeMap<Orbit, f64>);

impl Multiplicities {
    pub fn unit() -> Self {
        Self::default()
    }

    pub fn with(mut self, orbit: Orbit, k: f64) -> Self {
        self.0.insert(orbit, k);
        self
    }

    pub fn get(&self, orbit: Orbit) -> f64 {
        self.0.get(&orbit).copied().unwrap_or(1.0)
    }
}

/// A positive root written in the standard basis.
///
/// `code` lists 1-based coordinate indices with signs: `e_j - e_i` is
/// `[j, -i]`, `e_j + e_i` is `[j, i]` and `e_i` is `[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Root<T: Real> {
    pub vec: Vec<T>,
    pub orbit: Orbit,
    pub k: T,
    pub norm_sq: T,
    pub code: Vec<i32>,
}

impl<T: Real> Root<T> {
    fn from_code(n: usize, code: Vec<i32>, orbit: Orbit, k: T) -> Self {
        let mut vec = vec![T::zero(); n];
        for &c in &code {
            let idx = c.unsigned_abs() as usize - 1;
            vec[idx] += if c > 0 { T::one() } else { -T::one() };
        }
        let norm_sq = dot(&vec, &vec);
        Root {
            vec,
            orbit,
            k,
            norm_sq,
            code,
        }
    }

    /// `alpha . x`
    #[inline]
    pub fn dot(&self, x: &[T]) -> T {
        // Roots have at most two nonzero entries of magnitude one.
        self.code.iter().fold(T::zero(), |acc, &c| {
            let v = x[c.unsigned_abs() as usize - 1];
            if c > 0 {
                acc + v
            } else {
                acc - v
            }
        })
    }

    /// `sigma_alpha x = x - 2 (alpha.x / |alpha|^2) alpha`
    pub fn reflect(&self, x: &[T]) -> Vec<T> {
        let c = T::of(2.0) * self.dot(x) / self.norm_sq;
        x.iter()
            .zip(&self.vec)
            .map(|(&xi, &ai)| xi - c * ai)
            .collect()
    }

    /// The reflection as a signed permutation `(perm, signs)` acting by
    /// `e_k -> signs[k] e_{perm[k]}`.
    pub fn signed_permutation(&self) -> (Vec<usize>, Vec<i8>) {
        let n = self.vec.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut signs = vec![1i8; n];
        match self.code.as_slice() {
            &[i] => signs[i as usize - 1] = -1,
            &[j, i] => {
                let (a, b) = (j.unsigned_abs() as usize - 1, i.unsigned_abs() as usize - 1);
                perm.swap(a, b);
                if i > 0 {
                    signs[a] = -1;
                    signs[b] = -1;
                }
            }
            _ => unreachable!("roots of A and B have one or two entries"),
        }
        (perm, signs)
    }

    /// Human-readable label such as `e3-e1`.
    pub fn label(&self) -> String {
        match self.code.as_slice() {
            &[i] => format!("e{i}"),
            &[j, i] if i < 0 => format!("e{j}-e{}", -i),
            &[j, i] => format!("e{j}+e{i}"),
            _ => unreachable!(),
        }
    }
}

/// Serializable description of a root system: `{family, N, beta, k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub family: Family,
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    #[serde(default)]
    pub k: Multiplicities,
}

impl SystemSpec {
    pub fn new(family: Family, n: usize, beta: f64) -> Self {
        SystemSpec {
            family,
            n,
            beta,
            k: Multiplicities::unit(),
        }
    }

    pub fn build<T: Real>(&self) -> Result<RootSystem<T>> {
        build_root_system(self.family, self.n, T::of(self.beta), &self.k)
    }
}

#[derive(Debug, Clone)]
pub struct RootSystem<T: Real> {
    pub family: Family,
    pub rank: usize,
    pub beta: T,
    pub positive_roots: Vec<Root<T>>,
    pub gamma: T,
    pub multiplicities: Multiplicities,
}

/// Builds `A_{N-1}` (`family = A`, `n >= 2`) or `B_N` (`n >= 1`).
///
/// Fails with [`DunklError::Regime`] unless `beta * k > 1` on every orbit.
pub fn build_root_system<T: Real>(
    family: Family,
    n: usize,
    beta: T,
    k: &Multiplicities,
) -> Result<RootSystem<T>> {
    match family {
        Family::A if n < 2 => {
            return Err(DunklError::Dimension(format!(
                "A_(N-1) needs N >= 2, got {n}"
            )))
        }
        Family::B if n < 1 => return Err(DunklError::Dimension("B_N needs N >= 1".into())),
        _ => {}
    }
    for orbit in k.0.keys() {
        if !family.orbits().contains(orbit) {
            return Err(DunklError::InvalidArgument(format!(
                "orbit {orbit:?} does not exist in family {family}"
            )));
        }
    }
    if !(beta > T::zero()) {
        return Err(DunklError::Regime(format!(
            "beta must be positive, got {}",
            beta.as_f64()
        )));
    }
    for &orbit in family.orbits() {
        let ko = k.get(orbit);
        if !(ko >= 0.0) || !ko.is_finite() {
            return Err(DunklError::InvalidArgument(format!(
                "multiplicity {ko} on {orbit:?}"
            )));
        }
        if !(beta.as_f64() * ko > 1.0) {
            return Err(DunklError::Regime(format!(
                "beta*k = {} <= 1 on orbit {orbit:?}: jump rates diverge",
                beta.as_f64() * ko
            )));
        }
    }

    let n_i = n as i32;
    let mut roots = Vec::with_capacity(family.num_positive_roots(n));
    match family {
        Family::A => {
            let ka = T::of(k.get(Orbit::A));
            for i in 1..=n_i {
                for j in (i + 1)..=n_i {
                    roots.push(Root::from_code(n, vec![j, -i], Orbit::A, ka));
                }
            }
        }
        Family::B => {
            let ks = T::of(k.get(Orbit::Short));
            let kl = T::of(k.get(Orbit::Long));
            for i in 1..=n_i {
                roots.push(Root::from_code(n, vec![i], Orbit::Short, ks));
            }
            for i in 1..=n_i {
                for j in (i + 1)..=n_i {
                    roots.push(Root::from_code(n, vec![j, -i], Orbit::Long, kl));
                    roots.push(Root::from_code(n, vec![j, i], Orbit::Long, kl));
                }
            }
        }
    }
    let gamma = roots.iter().fold(T::zero(), |acc, r| acc + r.k);
    Ok(RootSystem {
        family,
        rank: n,
        beta,
        positive_roots: roots,
        gamma,
        multiplicities: k.clone(),
    })
}

impl<T: Real> RootSystem<T> {
    pub fn n(&self) -> usize {
        self.rank
    }

    pub fn num_roots(&self) -> usize {
        self.positive_roots.len()
    }

    pub fn root(&self, id: usize) -> &Root<T> {
        &self.positive_roots[id]
    }

    /// True when every multiplicity equals one.
    pub fn has_unit_multiplicities(&self) -> bool {
        self.positive_roots.iter().all(|r| r.k == T::one())
    }

    pub fn spec(&self) -> SystemSpec {
        SystemSpec {
            family: self.family,
            n: self.rank,
            beta: self.beta.as_f64(),
            k: self.multiplicities.clone(),
        }
    }

    /// `m = (1, 2, ..., N)`, strictly positive on every positive root.
    pub fn chamber_vector(&self) -> Vec<T> {
        (1..=self.rank).map(T::of_usize).collect()
    }

    pub fn reflect(&self, root: usize, x: &[T]) -> Vec<T> {
        self.positive_roots[root].reflect(x)
    }

    /// `w_beta(x) = prod |alpha.x|^{beta k(alpha)}`
    pub fn weight(&self, x: &[T]) -> T {
        self.positive_roots.iter().fold(T::one(), |acc, r| {
            acc * r.dot(x).abs().powf(self.beta * r.k)
        })
    }

    /// `log w_beta(x)`; `-inf` on walls.
    pub fn log_weight(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for r in &self.positive_roots {
            let d = r.dot(x).abs();
            if d == T::zero() {
                return -T::max_value().unwrap();
            }
            acc += self.beta * r.k * d.ln();
        }
        acc
    }

    /// `alpha.x >= -tol` for every positive root.
    pub fn chamber_contains(&self, x: &[T], tol: T) -> bool {
        self.positive_roots.iter().all(|r| r.dot(x) >= -tol)
    }

    /// Every root functional strictly positive.
    pub fn is_interior(&self, x: &[T]) -> bool {
        self.positive_roots.iter().all(|r| r.dot(x) > T::zero())
    }

    /// Maps `x` into the closed chamber by the W-action: sorting for `A`,
    /// absolute values then sorting for `B`.
    pub fn fold_into_chamber(&self, x: &mut [T]) {
        if self.family == Family::B {
            for v in x.iter_mut() {
                *v = v.abs();
            }
        }
        x.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    }

    /// Index of the positive root equal to `±v`, with the sign.
    pub fn find_root(&self, v: &[T]) -> Option<(usize, bool)> {
        self.positive_roots
            .iter()
            .position(|r| r.vec == v)
            .map(|i| (i, true))
            .or_else(|| {
                let neg: Vec<T> = v.iter().map(|&c| -c).collect();
                self.positive_roots
                    .iter()
                    .position(|r| r.vec == neg)
                    .map(|i| (i, false))
            })
    }
}
