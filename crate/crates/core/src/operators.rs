//! Concave elliptic Hessian operators `F(A) = f(λ(A))` with analytic gradients.
//!
//! | kind              | cone    | `f(λ)`                              |
//! |-------------------|---------|-------------------------------------|
//! | `MongeAmpere`     | `Γ_n`   | `(λ_1⋯λ_n)^{1/n}`                   |
//! | `KHessian(k)`     | `Γ_k`   | `σ_k^{1/k}`                         |
//! | `HessianQuotient` | `Γ_k`   | `(σ_k/σ_l)^{1/(k-l)}`, `1 <= l < k` |
//! | `PMongeAmpere(p)` | `Γ̂_p`   | `(∏_T Σ_{i∈T} λ_i)^{1/C(n,p)}`      |
//!
//! Products are evaluated in the log domain.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{sample_positive, ConeSampler, ConeSpec};
use crate::error::{Error, Result};
use crate::linalg::{eigen_sym, SymEigen, SymMatrix};
use crate::symfun::{binomial, sigma_all_slice, sigma_deleted_all, Spectrum};
use crate::MAX_DIM;

pub use crate::linalg::eigen_sym as eigen_decompose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    MongeAmpere,
    KHessian { k: usize },
    HessianQuotient { k: usize, l: usize },
    PMongeAmpere { p: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub n: usize,
    pub cone: ConeSpec,
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            OperatorKind::MongeAmpere => write!(f, "monge-ampere(n={})", self.n),
            OperatorKind::KHessian { k } => write!(f, "k-hessian(k={k}, n={})", self.n),
            OperatorKind::HessianQuotient { k, l } => {
                write!(f, "hessian-quotient(k={k}, l={l}, n={})", self.n)
            }
            OperatorKind::PMongeAmpere { p } => write!(f, "p-monge-ampere(p={p}, n={})", self.n),
        }
    }
}

/// Operator value and its linearization `F^{ij}` at a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub value: f64,
    pub spectrum: Vec<f64>,
    pub gradient: Vec<f64>,
    pub eigen: SymEigen,
    /// `F^{ij} = Q·diag(f_i)·Qᵀ`.
    pub matrix: SymMatrix,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, n: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        let cone = match kind {
            OperatorKind::MongeAmpere => ConeSpec::positive_orthant(n)?,
            OperatorKind::KHessian { k } => {
                ConeSpec::gamma_k(k, n).map_err(|e| Error::InvalidOperator(e.to_string()))?
            }
            OperatorKind::HessianQuotient { k, l } => {
                if l < 1 || l >= k {
                    return Err(Error::InvalidOperator(format!(
                        "hessian quotient needs 1 <= l < k, got k={k}, l={l}"
                    )));
                }
                ConeSpec::gamma_k(k, n).map_err(|e| Error::InvalidOperator(e.to_string()))?
            }
            OperatorKind::PMongeAmpere { p } => {
                ConeSpec::gamma_hat_p(p, n).map_err(|e| Error::InvalidOperator(e.to_string()))?
            }
        };
        Ok(Self { kind, n, cone })
    }

    pub fn monge_ampere(n: usize) -> Result<Self> {
        Self::new(OperatorKind::MongeAmpere, n)
    }

    pub fn k_hessian(k: usize, n: usize) -> Result<Self> {
        Self::new(OperatorKind::KHessian { k }, n)
    }

    pub fn hessian_quotient(k: usize, l: usize, n: usize) -> Result<Self> {
        Self::new(OperatorKind::HessianQuotient { k, l }, n)
    }

    pub fn p_monge_ampere(p: usize, n: usize) -> Result<Self> {
        Self::new(OperatorKind::PMongeAmpere { p }, n)
    }

    pub fn is_quotient(&self) -> bool {
        matches!(self.kind, OperatorKind::HessianQuotient { .. })
    }

    fn check(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: lambda.len() });
        }
        if !self.cone.contains_slice(lambda, 0.0) {
            return Err(Error::NotAdmissible {
                cone: self.cone.to_string(),
                values: lambda.to_vec(),
            });
        }
        Ok(())
    }

    /// `f(λ)`; fails outside the open cone.
    pub fn eval(&self, lambda: &Spectrum) -> Result<f64> {
        self.eval_slice(lambda)
    }

    pub fn eval_slice(&self, lambda: &[f64]) -> Result<f64> {
        self.check(lambda)?;
        Ok(self.eval_unchecked(lambda))
    }

    fn eval_unchecked(&self, lambda: &[f64]) -> f64 {
        let n = self.n;
        match self.kind {
            OperatorKind::MongeAmpere => {
                (lambda.iter().map(|v| v.ln()).sum::<f64>() / n as f64).exp()
            }
            OperatorKind::KHessian { k } => {
                let s = sigma_all_slice(lambda);
                s[k].powf(1.0 / k as f64)
            }
            OperatorKind::HessianQuotient { k, l } => {
                let s = sigma_all_slice(lambda);
                (s[k] / s[l]).powf(1.0 / (k - l) as f64)
            }
            OperatorKind::PMongeAmpere { p } => {
                let mut log_sum = 0.0;
                let mut count = 0usize;
                for_each_subset(n, p, |subset| {
                    let s: f64 = subset.iter().map(|&i| lambda[i]).sum();
                    log_sum += s.ln();
                    count += 1;
                });
                (log_sum / count as f64).exp()
            }
        }
    }

    /// Analytic gradient `∂f/∂λ_i`.
    pub fn grad(&self, lambda: &Spectrum) -> Result<Vec<f64>> {
        self.grad_slice(lambda)
    }

    pub fn grad_slice(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_grad_slice(lambda)?.1)
    }

    pub fn value_and_grad_slice(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(lambda)?;
        let n = self.n;
        let f = self.eval_unchecked(lambda);
        let grad = match self.kind {
            OperatorKind::MongeAmpere => lambda.iter().map(|v| f / (n as f64 * v)).collect(),
            OperatorKind::KHessian { k } => {
                let s = sigma_all_slice(lambda);
                let deleted = sigma_deleted_all(lambda);
                let factor = s[k].powf(1.0 / k as f64 - 1.0) / k as f64;
                deleted.iter().map(|d| factor * d[k - 1]).collect()
            }
            OperatorKind::HessianQuotient { k, l } => {
                let s = sigma_all_slice(lambda);
                let deleted = sigma_deleted_all(lambda);
                let m = (k - l) as f64;
                deleted
                    .iter()
                    .map(|d| f / m * (d[k - 1] / s[k] - d[l - 1] / s[l]))
                    .collect()
            }
            OperatorKind::PMongeAmpere { p } => {
                let mut acc = vec![0.0; n];
                let mut count = 0usize;
                for_each_subset(n, p, |subset| {
                    let s: f64 = subset.iter().map(|&i| lambda[i]).sum();
                    for &i in subset {
                        acc[i] += 1.0 / s;
                    }
                    count += 1;
                });
                acc.iter().map(|a| f * a / count as f64).collect()
            }
        };
        Ok((f, grad))
    }

    /// `f(1, …, 1)`.
    pub fn f_one(&self) -> f64 {
        self.eval_unchecked(&vec![1.0; self.n])
    }

    /// `λ / f(λ)`, so that `f = 1` by homogeneity.
    pub fn normalize(&self, lambda: &Spectrum) -> Result<Spectrum> {
        let f = self.eval(lambda)?;
        lambda.scaled(1.0 / f)
    }

    /// `F(A)` and `F^{ij}` through the spectral decomposition of `A`.
    pub fn linearize(&self, a: &SymMatrix) -> Result<Linearization> {
        if a.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: a.dim() });
        }
        let eigen = eigen_sym(a);
        let (value, gradient) = self.value_and_grad_slice(&eigen.values)?;
        let matrix = SymMatrix::from_spectral(&eigen.vectors, &gradient);
        Ok(Linearization {
            value,
            spectrum: eigen.values.clone(),
            gradient,
            eigen,
            matrix,
        })
    }

    /// `F(A)`.
    pub fn eval_matrix(&self, a: &SymMatrix) -> Result<f64> {
        if a.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: a.dim() });
        }
        self.eval_slice(&eigen_sym(a).values)
    }

    /// `|Σ f_i λ_i − f(λ)|`, zero for degree-one homogeneous `f`.
    pub fn homogeneity_residual(&self, lambda: &Spectrum) -> Result<f64> {
        let (f, g) = self.value_and_grad_slice(lambda)?;
        let euler: f64 = g.iter().zip(lambda.iter()).map(|(a, b)| a * b).sum();
        Ok((euler - f).abs())
    }

    /// Second variation `d²/dt² F(A + tB)` at `t = 0`.
    ///
    /// In the eigenframe of `A` with `B̃ = QᵀBQ` this is
    /// `Σ f_ik B̃_ii B̃_kk + Σ_{i≠j} (f_i − f_j)/(λ_i − λ_j)·B̃_ij²`; the
    /// quotient switches to its limit `f_ii − f_ij` when the eigenvalues
    /// coincide. `f_ik` is a central difference of the analytic gradient.
    pub fn second_variation(&self, a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
        let lin = self.linearize(a)?;
        let n = self.n;
        let q = &lin.eigen.vectors;
        let bt = b.conjugate(&q.transpose());
        let hess = self.gradient_jacobian(&lin.spectrum)?;
        let lam = &lin.spectrum;
        let g = &lin.gradient;
        let mut total = 0.0;
        for i in 0..n {
            for k in 0..n {
                total += hess[i][k] * bt.get(i, i) * bt.get(k, k);
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let gap = lam[i] - lam[j];
                let scale = 1.0_f64.max(lam[i].abs()).max(lam[j].abs());
                let dd = if gap.abs() <= COINCIDENCE_RTOL * scale {
                    hess[i][i] - hess[i][j]
                } else {
                    (g[i] - g[j]) / gap
                };
                total += dd * bt.get(i, j).powi(2);
            }
        }
        Ok(total)
    }

    /// `f_ij` by central differences of the analytic gradient.
    fn gradient_jacobian(&self, lambda: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.n;
        let scale = lambda.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut out = vec![vec![0.0; n]; n];
        for k in 0..n {
            let mut h = 1e-5 * scale;
            let (gp, gm) = loop {
                let mut plus = lambda.to_vec();
                let mut minus = lambda.to_vec();
                plus[k] += h;
                minus[k] -= h;
                match (self.grad_slice(&plus), self.grad_slice(&minus)) {
                    (Ok(gp), Ok(gm)) => break (gp, gm),
                    (Err(e), _) | (_, Err(e)) if h < 1e-14 * scale => return Err(e),
                    _ => h *= 0.5,
                }
            };
            for i in 0..n {
                out[i][k] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        for i in 0..n {
            for k in i + 1..n {
                let avg = 0.5 * (out[i][k] + out[k][i]);
                out[i][k] = avg;
                out[k][i] = avg;
            }
        }
        Ok(out)
    }
}

/// Eigenvalues closer than this (relative to `max(1, |λ_i|, |λ_j|)`) are
/// treated as coincident in divided differences.
pub const COINCIDENCE_RTOL: f64 = 1e-8;

/// Calls `visit` with every increasing `p`-subset of `0..n`.
pub(crate) fn for_each_subset<F: FnMut(&[usize])>(n: usize, p: usize, mut visit: F) {
    if p == 0 || p > n {
        return;
    }
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        visit(&idx);
        let mut i = p;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - p + i {
                idx[i] += 1;
                for j in i + 1..p {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GardingEstimate {
    pub operator: OperatorSpec,
    /// Smallest observed `(f(λ+τ) − f(λ)) / (τ_1⋯τ_n)^{1/n}` with `f(λ) = 1`.
    pub d_hat: f64,
    pub samples: usize,
    pub seed: u64,
    /// Set for the Hessian quotient, which is not expected to admit `d > 0`.
    pub quotient_warning: bool,
    pub argmin_lambda: Vec<f64>,
    pub argmin_tau: Vec<f64>,
}

/// Sampled estimate of the constant `d` in `f(λ+τ) ≥ f(λ) + d(τ_1⋯τ_n)^{1/n}`.
///
/// λ comes from the cone sampler normalized to `f(λ) = 1`; τ has independent
/// log-uniform entries in `[1e-3, 1e3]`. For the Hessian quotient the
/// observed infimum is returned with `quotient_warning` set.
pub fn estimate_garding_d(op: &OperatorSpec, sample_count: usize, seed: u64) -> Result<GardingEstimate> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be at least 1".into()));
    }
    let n = op.n;
    let mut sampler = ConeSampler::new(op.cone, seed);
    let mut tau_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut best = f64::INFINITY;
    let mut argmin_lambda = Vec::new();
    let mut argmin_tau = Vec::new();
    for _ in 0..sample_count {
        let lambda = op.normalize(&sampler.sample())?;
        let tau = sample_positive(&mut tau_rng, n, 1e-3, 1e3);
        let geo = (tau.iter().map(|t| t.ln()).sum::<f64>() / n as f64).exp();
        let shifted: Vec<f64> = lambda.iter().zip(&tau).map(|(a, b)| a + b).collect();
        let gain = op.eval_slice(&shifted)? - 1.0;
        let ratio = gain / geo;
        if ratio < best {
            best = ratio;
            argmin_lambda = lambda.to_vec();
            argmin_tau = tau;
        }
    }
    Ok(GardingEstimate {
        operator: *op,
        d_hat: best,
        samples: sample_count,
        seed,
        quotient_warning: op.is_quotient(),
        argmin_lambda,
        argmin_tau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionNConstants {
    pub n1: f64,
    pub n2: f64,
}

/// `(N1, N2) = ((2/d)^n, n − 1)`.
pub fn condition_n_constants(op: &OperatorSpec, d: f64) -> Result<ConditionNConstants> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::NonPositiveParameter { name: "d", value: d });
    }
    let n = op.n as i32;
    Ok(ConditionNConstants {
        n1: (2.0 / d).powi(n),
        n2: (n - 1) as f64,
    })
}

/// Lower bound `1/(N1·C^{N2})` on every `f_i` promised when `f(λ) = 1` and `Σ f_i ≤ C`.
pub fn condition_n_lower_bound(constants: &ConditionNConstants, c: f64) -> f64 {
    1.0 / (constants.n1 * c.powf(constants.n2))
}

/// Closed form of `f(1, …, 1)` per kind, used to cross-check `f_one`.
pub fn f_one_closed_form(op: &OperatorSpec) -> f64 {
    let n = op.n;
    match op.kind {
        OperatorKind::MongeAmpere => 1.0,
        OperatorKind::KHessian { k } => binomial(n, k).powf(1.0 / k as f64),
        OperatorKind::HessianQuotient { k, l } => {
            (binomial(n, k) / binomial(n, l)).powf(1.0 / (k - l) as f64)
        }
        OperatorKind::PMongeAmpere { p } => p as f64,
    }
}
