//! Small dense symmetric matrices and their eigendecomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symfun::Spectrum;

/// Dense symmetric `n × n` matrix, row-major. Symmetrized on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major data and replaces it by `(A + Aᵀ)/2`.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut m = Self { n, data };
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (m.data[i * n + j] + m.data[j * n + i]);
                m.data[i * n + j] = avg;
                m.data[j * n + i] = avg;
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, data)
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        SymMatrix { n: self.n, data }
    }

    pub fn scaled(&self, t: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|v| v * t).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Q · diag(d) · Qᵀ`.
    pub fn from_spectral(q: &Matrix, d: &[f64]) -> SymMatrix {
        let n = q.n;
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| q.get(i, k) * d[k] * q.get(j, k)).sum();
                out.set(i, j, v);
            }
        }
        out
    }

    /// `R · A · Rᵀ`.
    pub fn conjugate(&self, r: &Matrix) -> SymMatrix {
        let ra = r.mul(&Matrix { n: self.n, data: self.data.clone() });
        let rart = ra.mul(&r.transpose());
        SymMatrix::new(self.n, rart.data).expect("finite product")
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Matrix { n, data }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Matrix { n, data }
    }

    /// `max |(QᵀQ − I)_ij|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let qtq = self.transpose().mul(self);
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((qtq.get(i, j) - target).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthogonal matrix whose columns are the matching eigenvectors.
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::new(self.values.clone())
    }
}

const MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigendecomposition `A = Q·diag(λ)·Qᵀ`, eigenvalues sorted
/// descending.
pub fn eigen_sym(a: &SymMatrix) -> SymEigen {
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| m[p * n + q] * m[p * n + q])
            .sum::<f64>()
            .sqrt();
        if off == 0.0 || off <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta.is_infinite() { 0.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
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
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v.data[k * n + p];
                    let vkq = v.data[k * n + q];
                    v.data[k * n + p] = c * vkp - s * vkq;
                    v.data[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = Matrix::identity(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors.data[k * n + new_col] = v.data[k * n + old_col];
        }
    }
    SymEigen { values, vectors }
}

/// Largest eigenvalue magnitude.
pub fn spectral_norm(a: &SymMatrix) -> f64 {
    let e = eigen_sym(a);
    e.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Least-squares solution of the overdetermined system `A x ≈ b` by Householder QR.
/// `a` is row-major with `cols` columns.
pub fn least_squares(a: &[f64], cols: usize, b: &[f64]) -> Result<Vec<f64>> {
    let rows = b.len();
    if a.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, found: a.len() });
    }
    if rows < cols {
        return Err(Error::Underdetermined { nodes: rows, unknowns: cols });
    }
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    for k in 0..cols {
        let norm: f64 = (k..rows).map(|i| r[i * cols + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Underdetermined { nodes: rows, unknowns: cols });
        }
        let alpha = if r[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| r[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..cols {
            let dot: f64 = (k..rows).map(|i| v[i - k] * r[i * cols + j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                r[i * cols + j] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..rows).map(|i| v[i - k] * y[i]).sum();
        let f = 2.0 * dot / vnorm2;
        for i in k..rows {
            y[i] -= f * v[i - k];
        }
    }
    let max_diag = (0..cols).fold(0.0_f64, |m, k| m.max(r[k * cols + k].abs()));
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let d = r[k * cols + k];
        if d.abs() <= 1e-13 * max_diag {
            return Err(Error::Underdetermined { nodes: rows, unknowns: cols });
        }
        let s: f64 = (k + 1..cols).map(|j| r[k * cols + j] * x[j]).sum();
        x[k] = (y[k] - s) / d;
    }
    Ok(x)
}
