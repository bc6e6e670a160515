//! Dense square matrices, Cholesky solves and symmetric eigenvalues.
//!
//! Problem sizes here are a few hundred unknowns at most, so everything is
//! row-major `Vec<T>` storage.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| crate::scalar::dot(self.row(i), x))
            .collect()
    }

    /// `self^T x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + *a * *xi;
            }
        }
        out
    }

    /// `max |A_ij - A_ji|`
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `min_i (A_ii - sum_{j != i} |A_ij|)`; positive iff strictly
    /// diagonally dominant with positive diagonal.
    pub fn diagonal_dominance_margin(&self) -> T {
        (0..self.n)
            .map(|i| {
                let off = self
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .fold(T::zero(), |s, (_, a)| s + a.abs());
                self[(i, i)] - off
            })
            .fold(T::infinity(), T::min)
    }

    /// Solves `A x = b` for symmetric positive definite `A`.
    pub fn cholesky_solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(Error::Numerical {
                    message: format!("matrix not positive definite at pivot {j}"),
                    estimate: Some(d.as_f64()),
                });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - l[(i, k)] * y[k];
            }
            y[i] = y[i] / l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] = y[i] - l[(k, i)] * y[k];
            }
            y[i] = y[i] / l[(i, i)];
        }
        Ok(y)
    }

    /// Eigenvalues of the symmetric part, ascending, by cyclic Jacobi
    /// rotations.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let half = T::lit(0.5);
        let mut a = Self::from_fn(n, |i, j| half * (self[(i, j)] + self[(j, i)]));
        let scale = a.data.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt();
        let tiny = T::epsilon() * T::epsilon() * scale * scale;
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            if off <= tiny {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let tau = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt());
                    let c = (T::one() + t * t).sqrt().recip();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        eig
    }

    pub fn min_symmetric_eigenvalue(&self) -> T {
        self.symmetric_eigenvalues()
            .first()
            .copied()
            .unwrap_or_else(T::nan)
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}
