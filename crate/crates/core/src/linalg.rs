//! Small dense linear-algebra helpers not covered by `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{DunklError, Result};
use crate::scalar::Real;

/// Eigen-decomposition of a real symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalEigen<T: Real> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Column `i` is the unit eigenvector of `values[i]` (only when requested).
    pub vectors: Option<DMatrix<T>>,
}

/// Implicit QL with Wilkinson shifts on the tridiagonal matrix with diagonal
/// `diag` and sub/super-diagonal `off` (`off.len() == diag.len() - 1`).
pub fn tridiagonal_eigen<T: Real>(
    diag: &[T],
    off: &[T],
    want_vectors: bool,
) -> Result<TridiagonalEigen<T>> {
    let n = diag.len();
    if n == 0 {
        return Ok(TridiagonalEigen {
            values: vec![],
            vectors: None,
        });
    }
    if off.len() + 1 != n {
        return Err(DunklError::InvalidArgument(format!(
            "tridiagonal: {} diagonal entries but {} off-diagonal",
            n,
            off.len()
        )));
    }
    let mut d = diag.to_vec();
    let mut e: Vec<T> = off.to_vec();
    e.push(T::zero());
    let mut z = if want_vectors {
        Some(DMatrix::<T>::identity(n, n))
    } else {
        None
    };
    let eps = T::default_epsilon();
    let two = T::of(2.0);

    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(DunklError::Convergence {
                    iterations: iter,
                    residual: e[l].as_f64(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let signed_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + signed_r);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut i = m as isize - 1;
            let mut deflated = false;
            while i >= l as isize {
                let iu = i as usize;
                let f = s * e[iu];
                let b = c * e[iu];
                r = f.hypot(g);
                e[iu + 1] = r;
                if r == T::zero() {
                    d[iu + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[iu + 1] - p;
                r = (d[iu] - g) * s + two * c * b;
                p = s * r;
                d[iu + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_mut() {
                    for k in 0..n {
                        let f = z[(k, iu + 1)];
                        z[(k, iu + 1)] = s * z[(k, iu)] + c * f;
                        z[(k, iu)] = c * z[(k, iu)] - s * f;
                    }
                }
                i -= 1;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = z.map(|z| {
        let mut out = DMatrix::<T>::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            out.set_column(col, &z.column(src));
        }
        out
    });
    Ok(TridiagonalEigen { values, vectors })
}

/// Eigenpairs of a dense symmetric matrix sorted by descending eigenvalue.
pub fn symmetric_eigen_desc<T: Real>(m: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<T>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> Option<DVector<T>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(diag: &[f64], off: &[f64]) -> DMatrix<f64> {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = off[i];
                m[(i + 1, i)] = off[i];
            }
        }
        m
    }

    #[test]
    fn matches_dense_solver() {
        let diag = [1.0, -2.0, 0.5, 3.0, 0.0];
        let off = [0.3, 1.1, -0.7, 2.0];
        let eig = tridiagonal_eigen(&diag, &off, true).unwrap();
        let (mut want, _) = symmetric_eigen_desc(&dense(&diag, &off));
        want.reverse();
        for (a, b) in eig.values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let z = eig.vectors.unwrap();
        let m = dense(&diag, &off);
        for i in 0..5 {
            let v = z.column(i);
            let r = &m * v - v * eig.values[i];
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn one_by_one_and_diagonal() {
        let eig = tridiagonal_eigen(&[4.0], &[], false).unwrap();
        assert_eq!(eig.values, vec![4.0]);
        let eig = tridiagonal_eigen(&[3.0, 1.0, 2.0], &[0.0, 0.0], false).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn single_precision_runs() {
        let eig = tridiagonal_eigen(&[0.0f32, 0.0], &[1.0], false).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-6 && (eig.values[1] - 1.0).abs() < 1e-6);
    }
}
