//! Tensor-product checks of the frozen spin chain: su(N) generators, the
//! exchange-operator identity, ladder commutators, and which ladder
//! operators preserve the permutation subspace.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{hermite_zeros, pf_operator};
use crate::error::{DunklError, Result};
use crate::linalg::symmetric_eigen_desc;

pub type CMatrix = DMatrix<Complex64>;

/// Largest local dimension for two-site checks.
pub const MAX_TWO_SITE_N: usize = 8;
/// Largest `N` for checks on the full `N^N` chain space.
pub const MAX_CHAIN_N: usize = 4;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A single-site su(N) generator with its 1-based label `(j, l)`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub j: usize,
    pub l: usize,
    pub matrix: CMatrix,
}

impl Generator {
    pub fn is_cartan(&self) -> bool {
        self.j == self.l
    }
}

/// The `N² − 1` nonzero generators, ordered by `(j, l)`; the vanishing
/// `(N, N)` label is omitted.
pub fn su_generators(n: usize) -> Result<Vec<Generator>> {
    if !(2..=MAX_TWO_SITE_N).contains(&n) {
        return Err(DunklError::InvalidArgument(format!(
            "su(N) generators need 2 <= N <= {MAX_TWO_SITE_N}"
        )));
    }
    let mut out = Vec::with_capacity(n * n - 1);
    for j in 1..=n {
        for l in 1..=n {
            let mut m = CMatrix::zeros(n, n);
            let (a, b) = (j - 1, l - 1);
            if j < l {
                m[(a, b)] = c(0.5);
                m[(b, a)] = c(0.5);
            } else if l < j {
                m[(b, a)] = I * 0.5;
                m[(a, b)] = -I * 0.5;
            } else if j < n {
                let s = 1.0 / ((2 * j * (j + 1)) as f64).sqrt();
                for mm in 0..j {
                    m[(mm, mm)] = c(s);
                }
                m[(j, j)] = c(-(j as f64) * s);
            } else {
                continue;
            }
            out.push(Generator { j, l, matrix: m });
        }
    }
    Ok(out)
}

/// `f[a][b][c] = 2 Tr([J_a, J_b] J_c)`, so that `[J_a, J_b] = Σ_c f_abc J_c`.
pub fn structure_constants(gens: &[Generator]) -> Vec<Vec<Vec<Complex64>>> {
    let g = gens.len();
    let mut f = vec![vec![vec![Complex64::new(0.0, 0.0); g]; g]; g];
    for a in 0..g {
        for b in 0..g {
            let comm = &gens[a].matrix * &gens[b].matrix - &gens[b].matrix * &gens[a].matrix;
            for (cc, gc) in gens.iter().enumerate() {
                f[a][b][cc] = (&comm * &gc.matrix).trace() * 2.0;
            }
        }
    }
    f
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Largest `|Tr(J_a J_b) − δ_ab/2|` and largest `|J − J†|`.
pub fn generator_defects(gens: &[Generator]) -> (f64, f64) {
    let mut orth: f64 = 0.0;
    let mut herm: f64 = 0.0;
    for (a, ga) in gens.iter().enumerate() {
        herm = herm.max(max_abs(&(&ga.matrix - ga.matrix.adjoint())));
        for (b, gb) in gens.iter().enumerate() {
            let want = if a == b { 0.5 } else { 0.0 };
            orth = orth.max(((&ga.matrix * &gb.matrix).trace() - want).norm());
        }
    }
    (orth, herm)
}

/// Largest `|f_abc + f_bac|`.
pub fn antisymmetry_defect(f: &[Vec<Vec<Complex64>>]) -> f64 {
    let g = f.len();
    let mut d: f64 = 0.0;
    for a in 0..g {
        for b in 0..g {
            for cc in 0..g {
                d = d.max((f[a][b][cc] + f[b][a][cc]).norm());
            }
        }
    }
    d
}

/// `P|a,b⟩ = |b,a⟩` on the two-site space, row index `a·N + b`.
fn swap_two_site(n: usize) -> CMatrix {
    let mut p = CMatrix::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            p[(b * n + a, a * n + b)] = c(1.0);
        }
    }
    p
}

/// `max |P − (I/N + 2 Σ J ⊗ J)|` on `C^N ⊗ C^N`.
pub fn verify_exchange_identity(n: usize) -> Result<f64> {
    let gens = su_generators(n)?;
    let mut rhs = CMatrix::identity(n * n, n * n) * c(1.0 / n as f64);
    for g in &gens {
        rhs += g.matrix.kronecker(&g.matrix) * c(2.0);
    }
    Ok(max_abs(&(swap_two_site(n) - rhs)))
}

/// Digits of a chain basis index, site 0 most significant.
fn digits(mut idx: usize, n: usize, sites: usize) -> Vec<usize> {
    let mut d = vec![0; sites];
    for s in (0..sites).rev() {
        d[s] = idx % n;
        idx /= n;
    }
    d
}

fn undigits(d: &[usize], n: usize) -> usize {
    d.iter().fold(0, |acc, &v| acc * n + v)
}

/// The chain space `(C^N)^{⊗N}` with the frozen positions `z`.
pub struct Chain {
    pub n: usize,
    pub dim: usize,
    pub z: Vec<f64>,
    pub gens: Vec<Generator>,
    pub f: Vec<Vec<Vec<Complex64>>>,
}

impl Chain {
    pub fn new(n: usize) -> Result<Self> {
        if !(2..=MAX_CHAIN_N).contains(&n) {
            let dim = n.pow(n as u32);
            return Err(DunklError::Size {
                order: dim,
                cap: MAX_CHAIN_N.pow(MAX_CHAIN_N as u32),
            });
        }
        let gens = su_generators(n)?;
        let f = structure_constants(&gens);
        Ok(Chain {
            n,
            dim: n.pow(n as u32),
            z: hermite_zeros(n)?,
            gens,
            f,
        })
    }

    /// `op` acting on `site`.
    pub fn site_operator(&self, op: &CMatrix, site: usize) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            let d = digits(col, self.n, self.n);
            for p in 0..self.n {
                let v = op[(p, d[site])];
                if v.norm() != 0.0 {
                    let mut e = d.clone();
                    e[site] = p;
                    out[(undigits(&e, self.n), col)] += v;
                }
            }
        }
        out
    }

    /// Swap of sites `i` and `j`.
    pub fn exchange(&self, i: usize, j: usize) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            let mut d = digits(col, self.n, self.n);
            d.swap(i, j);
            out[(undigits(&d, self.n), col)] = c(1.0);
        }
        out
    }

    /// `M̂ = (1/2) Σ_{i<j} P_{j,i} / (z_j − z_i)²`
    pub fn m_hat(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for i in 0..self.n {
            for j in i + 1..self.n {
                m += self.exchange(i, j) * c(0.5 / (self.z[j] - self.z[i]).powi(2));
            }
        }
        m
    }

    /// `K̂^a = Σ_m z_m J^a_m`
    pub fn k_hat(&self, a: usize) -> CMatrix {
        let mut k = CMatrix::zeros(self.dim, self.dim);
        for m in 0..self.n {
            k += self.site_operator(&self.gens[a].matrix, m) * c(self.z[m]);
        }
        k
    }

    /// `L̂^a = Σ_{b,c} Σ_{m≠n} f_abc / (z_m − z_n) J^b_m J^c_n`
    pub fn l_hat(&self, a: usize) -> CMatrix {
        let n = self.n;
        // g[p][dm][q][dn] = Σ_{b,c} f_abc J^b[p, dm] J^c[q, dn]
        let mut g = vec![Complex64::new(0.0, 0.0); n * n * n * n];
        for (b, gb) in self.gens.iter().enumerate() {
            for (cc, gc) in self.gens.iter().enumerate() {
                let fabc = self.f[a][b][cc];
                if fabc.norm() < 1e-15 {
                    continue;
                }
                for p in 0..n {
                    for dm in 0..n {
                        let x = gb.matrix[(p, dm)];
                        if x.norm() == 0.0 {
                            continue;
                        }
                        for q in 0..n {
                            for dn in 0..n {
                                g[((p * n + dm) * n + q) * n + dn] += fabc * x * gc.matrix[(q, dn)];
                            }
                        }
                    }
                }
            }
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            let d = digits(col, n, n);
            for m in 0..n {
                for s in 0..n {
                    if s == m {
                        continue;
                    }
                    let w = 1.0 / (self.z[m] - self.z[s]);
                    for p in 0..n {
                        for q in 0..n {
                            let v = g[((p * n + d[m]) * n + q) * n + d[s]];
                            if v.norm() == 0.0 {
                                continue;
                            }
                            let mut e = d.clone();
                            e[m] = p;
                            e[s] = q;
                            out[(undigits(&e, n), col)] += v * w;
                        }
                    }
                }
            }
        }
        out
    }

    /// Basis indices of `|ρ(1), …, ρ(N)⟩` for the permutations `perms`.
    fn permutation_states(&self, perms: &[Vec<usize>]) -> Vec<usize> {
        perms.iter().map(|p| undigits(p, self.n)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorDeviation {
    pub j: usize,
    pub l: usize,
    /// `max |[M̂, K̂] − L̂/2|`
    pub dev_k: f64,
    /// `max |[M̂, L̂] − K̂/2|`
    pub dev_l: f64,
}

/// Commutator deviations for every generator label.
pub fn verify_ladder_commutators(n: usize) -> Result<Vec<CommutatorDeviation>> {
    let chain = Chain::new(n)?;
    let m = chain.m_hat();
    Ok((0..chain.gens.len())
        .map(|a| {
            let k = chain.k_hat(a);
            let l = chain.l_hat(a);
            let ck = &m * &k - &k * &m;
            let cl = &m * &l - &l * &m;
            CommutatorDeviation {
                j: chain.gens[a].j,
                l: chain.gens[a].l,
                dev_k: max_abs(&(ck - &l * c(0.5))),
                dev_l: max_abs(&(cl - &k * c(0.5))),
            }
        })
        .collect())
}

/// Largest `|M̂ v − (r ± 1/2) v| / |v|` for `v = (K̂ ± L̂) φ` over all
/// generators, eigenvectors `φ` of `M̂` and both signs, skipping images with
/// `|v| < 1e-8`. Returns the residual and the number of shifted vectors.
pub fn verify_ladder_shift(n: usize) -> Result<(f64, usize)> {
    let chain = Chain::new(n)?;
    let m = chain.m_hat();
    let real = m.map(|v| v.re);
    let (values, vectors) = symmetric_eigen_desc(&real);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for a in 0..chain.gens.len() {
        let k = chain.k_hat(a);
        let l = chain.l_hat(a);
        for sign in [1.0, -1.0] {
            let op = &k + &l * c(sign);
            for (i, &r) in values.iter().enumerate() {
                let phi = vectors.column(i).map(c);
                let v = &op * phi;
                let norm = v.norm();
                if norm < 1e-8 {
                    continue;
                }
                let res = (&m * &v - &v * c(r + 0.5 * sign)).norm() / norm;
                worst = worst.max(res);
                count += 1;
            }
        }
    }
    Ok((worst, count))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceCase {
    pub j: usize,
    pub l: usize,
    /// `|(1 − Π) A Π| / |A Π|` (Frobenius) for `A = K̂ − L̂` and `Π` the
    /// projector on the permutation span.
    pub leak: f64,
    pub stays: bool,
    /// For a preserved case, `|M⁽⁰⁾ f + f/2| / |f|` of the image read back on `S_N`.
    pub eigen_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub cases: Vec<SubspaceCase>,
    /// Lowering operators that keep the uniform permutation vector in the
    /// permutation span and produce a `−1/2` eigenvector.
    pub valid_lowering: usize,
    /// Rank of the produced `−1/2` eigenvectors.
    pub rank: usize,
}

/// Checks, for every label, whether `K̂ − L̂` preserves the permutation span
/// and what it does to the uniform permutation vector.
pub fn verify_ladder_subspace(n: usize) -> Result<SubspaceReport> {
    let chain = Chain::new(n)?;
    let (perms, m0) = pf_operator(&chain.z);
    let states = chain.permutation_states(&perms);
    let mut uniform = nalgebra::DVector::<Complex64>::zeros(chain.dim);
    let amp = 1.0 / (perms.len() as f64).sqrt();
    for &s in &states {
        uniform[s] = c(amp);
    }
    let mut inside = vec![false; chain.dim];
    for &s in &states {
        inside[s] = true;
    }
    let mut cases = Vec::new();
    let mut produced: Vec<nalgebra::DVector<f64>> = Vec::new();
    for a in 0..chain.gens.len() {
        let op = chain.k_hat(a) - chain.l_hat(a);
        // Leakage of the operator restricted to the permutation span.
        let (mut out_sq, mut all_sq) = (0.0, 0.0);
        for &col in &states {
            for row in 0..chain.dim {
                let w = op[(row, col)].norm_sqr();
                all_sq += w;
                if !inside[row] {
                    out_sq += w;
                }
            }
        }
        let leak = if all_sq > 0.0 {
            (out_sq / all_sq).sqrt()
        } else {
            0.0
        };
        let stays = all_sq > 0.0 && leak <= 1e-10;
        let v = &op * &uniform;
        let eigen_residual = (stays && v.norm() > 1e-12).then(|| {
            // Read the image back as a real function on S_N.
            let f = nalgebra::DVector::from_iterator(states.len(), states.iter().map(|&s| v[s].re));
            let fim: f64 = states.iter().map(|&s| v[s].im.abs()).fold(0.0, f64::max);
            let res = (&m0 * &f + &f * 0.5).norm() / f.norm();
            produced.push(f);
            res.max(fim)
        });
        cases.push(SubspaceCase {
            j: chain.gens[a].j,
            l: chain.gens[a].l,
            leak,
            stays,
            eigen_residual,
        });
    }
    let valid_lowering = cases
        .iter()
        .filter(|c| c.stays && c.eigen_residual.is_some_and(|r| r <= 1e-9))
        .count();
    let rank = if produced.is_empty() {
        0
    } else {
        let mat = nalgebra::DMatrix::from_columns(&produced);
        mat.svd(false, false)
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-9)
            .count()
    };
    Ok(SubspaceReport {
        n,
        cases,
        valid_lowering,
        rank,
    })
}
