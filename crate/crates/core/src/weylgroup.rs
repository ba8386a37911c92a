//! Enumerated Weyl groups (`S_N` and signed permutations) with the
//! right-multiplication tables used to assemble master operators.

use crate::error::{DunklError, Result};
use crate::rootsys::{Family, RootSystem};
use crate::scalar::Real;

/// Default cap on `|W|`.
pub const DEFAULT_ORDER_CAP: usize = 10_080;

/// A signed permutation acting by `e_k -> signs[k] e_{perm[k]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupElement {
    pub perm: Vec<usize>,
    pub signs: Vec<i8>,
    pub index: usize,
}

impl GroupElement {
    pub fn rank(&self) -> usize {
        self.perm.len()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p) && self.signs.iter().all(|&s| s == 1)
    }
}

/// `(g x)_{perm[k]} = signs[k] x_k`
pub fn act<T: Real>(g: &GroupElement, x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    for (k, &xk) in x.iter().enumerate() {
        y[g.perm[k]] = if g.signs[k] < 0 { -xk } else { xk };
    }
    y
}

/// Determinant of the signed permutation matrix.
pub fn sign_of(g: &GroupElement) -> i8 {
    let n = g.perm.len();
    let mut seen = vec![false; n];
    let mut parity = 1i8;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = g.perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            parity = -parity;
        }
    }
    g.signs.iter().fold(parity, |acc, &s| acc * s)
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// `|W|` if it fits in `usize`.
pub fn checked_order(family: Family, n: usize) -> Option<usize> {
    let fact = (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k))?;
    match family {
        Family::A => Some(fact),
        Family::B => fact.checked_mul(1usize.checked_shl(n as u32)?),
    }
}

/// Index of a signed permutation in the enumeration order used by
/// [`enumerate`]. The caller guarantees `|W|` fits in `usize`.
pub fn element_index(family: Family, perm: &[usize], signs: &[i8]) -> usize {
    match family {
        Family::A => perm_rank(perm),
        Family::B => (perm_rank(perm) << perm.len()) | signs_rank(signs),
    }
}

/// Inverse of [`element_index`].
pub fn element_at(family: Family, n: usize, index: usize) -> GroupElement {
    let (perm, signs) = match family {
        Family::A => (perm_unrank(index, n), vec![1; n]),
        Family::B => (
            perm_unrank(index >> n, n),
            signs_unrank(index & ((1 << n) - 1), n),
        ),
    };
    GroupElement { perm, signs, index }
}

/// `(g ∘ h)` as a signed permutation: first `h`, then `g`.
pub fn compose_signed(g: (&[usize], &[i8]), h: (&[usize], &[i8])) -> (Vec<usize>, Vec<i8>) {
    let n = g.0.len();
    let perm = (0..n).map(|k| g.0[h.0[k]]).collect();
    let signs = (0..n).map(|k| h.1[k] * g.1[h.0[k]]).collect();
    (perm, signs)
}

/// Lexicographic rank of a permutation of `0..n`.
fn perm_rank(perm: &[usize]) -> usize {
    let n = perm.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller = perm[i + 1..].iter().filter(|&&p| p < perm[i]).count();
        rank += smaller * factorial(n - 1 - i);
    }
    rank
}

fn perm_unrank(mut rank: usize, n: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = factorial(n - 1 - i);
        let q = rank / f;
        rank %= f;
        out.push(pool.remove(q));
    }
    out
}

/// Sign pattern as bits, coordinate 0 most significant, `-1` as a set bit.
fn signs_rank(signs: &[i8]) -> usize {
    signs
        .iter()
        .fold(0, |acc, &s| (acc << 1) | usize::from(s < 0))
}

fn signs_unrank(rank: usize, n: usize) -> Vec<i8> {
    (0..n)
        .map(|i| {
            if (rank >> (n - 1 - i)) & 1 == 1 {
                -1
            } else {
                1
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GroupTable {
    pub family: Family,
    pub rank: usize,
    pub order: usize,
    pub elements: Vec<GroupElement>,
    /// `right_mult[a][i]` is the index of `elements[i] ∘ σ_a`.
    pub right_mult: Vec<Vec<usize>>,
    /// Index of the reflection `σ_a` for each positive root `a`.
    pub reflections: Vec<usize>,
}

pub fn enumerate<T: Real>(r: &RootSystem<T>) -> Result<GroupTable> {
    enumerate_with_cap(r, DEFAULT_ORDER_CAP)
}

pub fn enumerate_with_cap<T: Real>(r: &RootSystem<T>, cap: usize) -> Result<GroupTable> {
    let n = r.rank;
    let order = r.family.group_order(n);
    if order > cap {
        return Err(DunklError::Size { order, cap });
    }
    let sign_count = match r.family {
        Family::A => 1,
        Family::B => 1usize << n,
    };
    let mut elements = Vec::with_capacity(order);
    for p in 0..factorial(n) {
        let perm = perm_unrank(p, n);
        for s in 0..sign_count {
            let signs = if r.family == Family::A {
                vec![1; n]
            } else {
                signs_unrank(s, n)
            };
            let index = elements.len();
            elements.push(GroupElement {
                perm: perm.clone(),
                signs,
                index,
            });
        }
    }
    let mut table = GroupTable {
        family: r.family,
        rank: n,
        order,
        elements,
        right_mult: Vec::new(),
        reflections: Vec::new(),
    };
    for root in &r.positive_roots {
        let (perm, signs) = root.signed_permutation();
        let refl = table.index_of(&perm, &signs);
        table.reflections.push(refl);
        let row = (0..order).map(|i| table.compose_index(i, refl)).collect();
        table.right_mult.push(row);
    }
    Ok(table)
}

impl GroupTable {
    pub fn identity(&self) -> usize {
        0
    }

    pub fn num_roots(&self) -> usize {
        self.right_mult.len()
    }

    pub fn index_of(&self, perm: &[usize], signs: &[i8]) -> usize {
        element_index(self.family, perm, signs)
    }

    /// `g ∘ h` as matrices: first `h`, then `g`.
    pub fn compose(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        let (perm, signs) = compose_signed((&g.perm, &g.signs), (&h.perm, &h.signs));
        let index = self.index_of(&perm, &signs);
        GroupElement { perm, signs, index }
    }

    pub fn compose_index(&self, g: usize, h: usize) -> usize {
        self.compose(&self.elements[g], &self.elements[h]).index
    }

    pub fn sign(&self, i: usize) -> i8 {
        sign_of(&self.elements[i])
    }

    /// `sign(τ)` for every element in index order.
    pub fn signs(&self) -> Vec<i8> {
        self.elements.iter().map(sign_of).collect()
    }
}
