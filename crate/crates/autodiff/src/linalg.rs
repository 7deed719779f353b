//! Small dense linear algebra on row-major square matrices.
//!
//! Everything here works on `&[T]` slices of length `n * n` so the same routines
//! serve the geometry kernel and the tape's matrix-function primitives.

use crate::error::{AutodiffError, Result};
use crate::scalar::Real;

/// `a (m x k) * b (k x n)`.
pub fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    matmul_into(a, b, m, k, n, &mut out);
    out
}

pub fn matmul_into<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    for v in out.iter_mut() {
        *v = T::zero();
    }
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let row = &b[p * n..(p + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (d, &bv) in dst.iter_mut().zip(row) {
                *d = *d + aip * bv;
            }
        }
    }
}

pub fn transpose<T: Real>(a: &[T], m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

/// `(a + a^T) / 2`.
pub fn symmetrize<T: Real>(a: &[T], n: usize) -> Vec<T> {
    let half = T::lit(0.5);
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = (a[i * n + j] + a[j * n + i]) * half;
        }
    }
    out
}

pub fn identity<T: Real>(n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        out[i * n + i] = T::one();
    }
    out
}

pub fn frobenius_norm<T: Real>(a: &[T]) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub n: usize,
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Row-major matrix whose column `j` is the eigenvector of `values[j]`.
    pub vectors: Vec<T>,
}

impl<T: Real> SymEigen<T> {
    /// Decomposes the symmetric part of `a`.
    pub fn new(a: &[T], n: usize) -> Result<Self> {
        if a.iter().any(|x| !x.is_finite()) {
            return Err(AutodiffError::NonFinite("eigendecomposition"));
        }
        let mut m = symmetrize(a, n);
        let mut v = identity::<T>(n);
        let scale = frobenius_norm(&m);
        let tol = T::epsilon() * scale * T::lit(0.01);
        for _sweep in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off + m[i * n + j] * m[i * n + j];
                }
            }
            if off.sqrt() <= tol || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[p * n + q];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = m[p * n + p];
                    let aqq = m[q * n + q];
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = m[k * n + p];
                        let akq = m[k * n + q];
                        m[k * n + p] = c * akp - s * akq;
                        m[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = m[p * n + k];
                        let aqk = m[q * n + k];
                        m[p * n + k] = c * apk - s * aqk;
                        m[q * n + k] = s * apk + c * aqk;
                    }
                    m[p * n + q] = T::zero();
                    m[q * n + p] = T::zero();
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());
        let values = order.iter().map(|&i| m[i * n + i]).collect();
        let mut vectors = vec![T::zero(); n * n];
        for (newc, &oldc) in order.iter().enumerate() {
            for r in 0..n {
                vectors[r * n + newc] = v[r * n + oldc];
            }
        }
        Ok(Self { n, values, vectors })
    }

    /// `Q diag(f(values)) Q^T`.
    pub fn apply(&self, f: impl Fn(T) -> T) -> Vec<T> {
        let n = self.n;
        let fv: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + self.vectors[i * n + k] * fv[k] * self.vectors[j * n + k];
                }
                out[i * n + j] = acc;
                out[j * n + i] = acc;
            }
        }
        out
    }

    pub fn min_value(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &[T], n: usize) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(AutodiffError::NotPositiveDefinite);
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = (a[i * n + j] + a[j * n + i]) * T::lit(0.5);
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix with nonzero diagonal.
pub fn lower_triangular_inverse<T: Real>(l: &[T], n: usize) -> Vec<T> {
    let mut inv = vec![T::zero(); n * n];
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in col..i {
                s = s - l[i * n + k] * inv[k * n + col];
            }
            inv[i * n + col] = s / l[i * n + i];
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn eigen_reconstructs() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0];
        let e = SymEigen::new(&a, 3).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = e.apply(|x| x);
        assert!(close(&back, &a, 1e-12));
        let qtq = matmul(&transpose(&e.vectors, 3, 3), &e.vectors, 3, 3, 3);
        assert!(close(&qtq, &identity(3), 1e-12));
    }

    #[test]
    fn eigen_of_diagonal_and_repeated() {
        let a = [2.0, 0.0, 0.0, 2.0];
        let e = SymEigen::new(&a, 2).unwrap();
        assert_eq!(e.values, vec![2.0, 2.0]);
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        assert!(close(&l, &[2.0, 0.0, 1.0, 2.0_f64.sqrt()], 1e-15));
        let llt = matmul(&l, &transpose(&l, 2, 2), 2, 2, 2);
        assert!(close(&llt, &a, 1e-14));
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
    }

    #[test]
    fn triangular_inverse() {
        let l = [2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -1.0, 0.5, 4.0];
        let inv = lower_triangular_inverse(&l, 3);
        assert!(close(&matmul(&l, &inv, 3, 3, 3), &identity(3), 1e-15));
    }
}
