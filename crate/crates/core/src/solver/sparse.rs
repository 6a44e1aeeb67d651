//! Compressed-row matrices and a restarted GMRES with ILU(0) preconditioning.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.cols[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::LinearSolve { iterations: 0, relative_residual: f64::NAN });
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.cols[k]] = k;
            }
            for k in start..end {
                let j = lu.cols[k];
                if j >= i {
                    break;
                }
                let pivot = lu.vals[diag[j]];
                let factor = lu.vals[k] / pivot;
                lu.vals[k] = factor;
                for m in diag[j] + 1..lu.row_ptr[j + 1] {
                    let c = lu.cols[m];
                    let p = pos[c];
                    if p != usize::MAX {
                        lu.vals[p] -= factor * lu.vals[m];
                    }
                }
            }
            for k in start..end {
                pos[lu.cols[k]] = usize::MAX;
            }
            let d = lu.vals[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::LinearSolve { iterations: 0, relative_residual: f64::NAN });
            }
        }
        Ok(Self { lu, diag })
    }

    /// Solves `L U z = r` in place.
    pub fn apply(&self, z: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut acc = z[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                acc -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = acc;
        }
        for i in (0..lu.n).rev() {
            let mut acc = z[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                acc -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = acc / lu.vals[self.diag[i]];
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    /// Returned solutions must reach at least this relative residual.
    pub required_reduction: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 80,
            max_iterations: 4000,
            relative_tolerance: 1e-11,
            required_reduction: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearSolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn true_residual(a: &CsrMatrix, x: &[f64], b: &[f64], work: &mut [f64]) -> f64 {
    a.mul_vec(x, work);
    work.iter().zip(b).map(|(ax, bi)| (bi - ax).powi(2)).sum::<f64>().sqrt()
}

/// Right-preconditioned restarted GMRES for `A x = b`, starting from `x = 0`.
pub fn gmres(a: &CsrMatrix, b: &[f64], precond: &Ilu0, opts: &GmresOptions) -> Result<(Vec<f64>, LinearSolveStats)> {
    let n = a.dim();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, LinearSolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let m = opts.restart.max(1);
    let mut work = vec![0.0; n];
    let mut iterations = 0;
    let mut rel = 1.0;

    while iterations < opts.max_iterations {
        a.mul_vec(&x, &mut work);
        let r: Vec<f64> = b.iter().zip(&work).map(|(bi, ax)| bi - ax).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.relative_tolerance {
            break;
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut k_used = 0;
        for k in 0..m {
            let mut z = basis[k].clone();
            precond.apply(&mut z);
            let mut w = vec![0.0; n];
            a.mul_vec(&z, &mut w);
            zs.push(z);
            for (j, v) in basis.iter().enumerate() {
                let hjk: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
                hess[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hjk * vi;
                }
            }
            let hn = norm(&w);
            hess[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = (hess[k][k].powi(2) + hess[k + 1][k].powi(2)).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            if hn > 0.0 {
                basis.push(w.iter().map(|v| v / hn).collect());
            }
            if g[k + 1].abs() / bnorm <= opts.relative_tolerance
                || iterations >= opts.max_iterations
                || hn == 0.0
            {
                break;
            }
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&zs[j]) {
                *xi += yj * zi;
            }
        }
        rel = true_residual(a, &x, b, &mut work) / bnorm;
        if rel <= opts.relative_tolerance || k_used == 0 {
            break;
        }
    }
    if !(rel <= opts.required_reduction) {
        return Err(Error::LinearSolve { iterations, relative_residual: rel });
    }
    Ok((x, LinearSolveStats { iterations, relative_residual: rel }))
}
