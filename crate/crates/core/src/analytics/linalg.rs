//! Small dense linear algebra: row-major matrix, Householder QR and the cyclic
//! Jacobi eigensolver. Single-threaded and deterministic.

#![allow(clippy::needless_range_loop)]

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |s, (&a, &b)| s + a * b))
            .collect()
    }

    /// `selfᵀ v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "shape mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let mut m = Self::zeros(self.rows, keep.len());
        for i in 0..self.rows {
            for (jj, &j) in keep.iter().enumerate() {
                m[(i, jj)] = self[(i, j)];
            }
        }
        m
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder QR of a tall matrix. Q is kept implicitly as reflectors.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    /// R in the upper triangle, reflector tails below the diagonal.
    packed: Matrix<T>,
    /// Leading reflector entries and their norms.
    heads: Vec<T>,
    betas: Vec<T>,
}

impl<T: Real> Qr<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        let (m, n) = (a.rows, a.cols);
        assert!(m >= n, "QR needs rows >= cols");
        let mut r = a.clone();
        let mut heads = vec![T::zero(); n];
        let mut betas = vec![T::zero(); n];
        for k in 0..n {
            let norm = (k..m).fold(T::zero(), |s, i| s + r[(i, k)] * r[(i, k)]).sqrt();
            if norm == T::zero() {
                continue;
            }
            let alpha = if r[(k, k)] > T::zero() { -norm } else { norm };
            let v0 = r[(k, k)] - alpha;
            // v = (v0, r[k+1.., k]); H = I - beta v vᵀ with beta = 2 / vᵀv
            let vtv = v0 * v0 + (k + 1..m).fold(T::zero(), |s, i| s + r[(i, k)] * r[(i, k)]);
            if vtv == T::zero() {
                continue;
            }
            let beta = T::lit(2.0) / vtv;
            for j in k + 1..n {
                let mut dot = v0 * r[(k, j)];
                for i in k + 1..m {
                    dot = dot + r[(i, k)] * r[(i, j)];
                }
                let s = beta * dot;
                r[(k, j)] = r[(k, j)] - s * v0;
                for i in k + 1..m {
                    r[(i, j)] = r[(i, j)] - s * r[(i, k)];
                }
            }
            r[(k, k)] = alpha;
            heads[k] = v0;
            betas[k] = beta;
        }
        Self { packed: r, heads, betas }
    }

    pub fn r_diag(&self) -> Vec<T> {
        (0..self.packed.cols).map(|k| self.packed[(k, k)]).collect()
    }

    /// Columns whose R diagonal is negligible relative to the column scale:
    /// each is (numerically) a combination of the columns before it.
    pub fn dependent_columns(&self, a: &Matrix<T>) -> Vec<usize> {
        let tol = T::epsilon().sqrt() * T::lit(1e-2);
        (0..a.cols)
            .filter(|&k| {
                let scale = (0..a.rows).fold(T::zero(), |s, i| s + a[(i, k)] * a[(i, k)]).sqrt();
                scale == T::zero() || self.packed[(k, k)].abs() <= tol * scale
            })
            .collect()
    }

    /// `Qᵀ b`.
    pub fn qt_mul(&self, b: &[T]) -> Vec<T> {
        let m = self.packed.rows;
        let mut y = b.to_vec();
        for k in 0..self.packed.cols {
            if self.betas[k] == T::zero() {
                continue;
            }
            let mut dot = self.heads[k] * y[k];
            for i in k + 1..m {
                dot = dot + self.packed[(i, k)] * y[i];
            }
            let s = self.betas[k] * dot;
            y[k] = y[k] - s * self.heads[k];
            for i in k + 1..m {
                y[i] = y[i] - s * self.packed[(i, k)];
            }
        }
        y
    }

    /// Least-squares solution of `a x = b`. Assumes full column rank.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.packed.cols;
        let y = self.qt_mul(b);
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s = s - self.packed[(i, j)] * x[j];
            }
            x[i] = s / self.packed[(i, i)];
        }
        x
    }

    /// `(aᵀa)⁻¹ = R⁻¹ R⁻ᵀ`.
    pub fn gram_inverse(&self) -> Matrix<T> {
        let n = self.packed.cols;
        let mut rinv = Matrix::zeros(n, n);
        for j in 0..n {
            rinv[(j, j)] = T::one() / self.packed[(j, j)];
            for i in (0..j).rev() {
                let mut s = T::zero();
                for k in i + 1..=j {
                    s = s + self.packed[(i, k)] * rinv[(k, j)];
                }
                rinv[(i, j)] = -s / self.packed[(i, i)];
            }
        }
        rinv.matmul(&rinv.transpose())
    }
}

/// Eigen-decomposition of a symmetric matrix. Eigenvalues are sorted in
/// descending order; eigenvectors are the matching columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

pub fn symmetric_eigen<T: Real>(a: &Matrix<T>) -> SymmetricEigen<T> {
    let n = a.rows;
    assert_eq!(n, a.cols, "matrix must be square");
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |s, (i, j)| s + m[(i, j)] * m[(i, j)]);
        if off <= T::epsilon() * T::epsilon() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    SymmetricEigen {
        values: order.iter().map(|&i| m[(i, i)]).collect(),
        vectors: v.select_columns(&order),
    }
}
