//! Elementary symmetric polynomials of an eigenvalue vector.
//!
//! All evaluations go through the coefficient recurrence of `∏(x + λ_i)`,
//! which costs O(n²) and is exact on integer data up to rounding.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::MAX_DIM;

/// Eigenvalue vector of a symmetric matrix, `2 <= n <= 12`, all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    /// Constant vector `(t, …, t)`.
    pub fn constant(n: usize, t: f64) -> Result<Self> {
        Self::new(vec![t; n])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Copy sorted in descending order `λ_1 ≥ … ≥ λ_n`.
    pub fn sorted_descending(&self) -> Spectrum {
        let mut values = self.values.clone();
        values.sort_by(|a, b| b.total_cmp(a));
        Spectrum { values }
    }

    /// Copy with every entry multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Result<Spectrum> {
        Spectrum::new(self.values.iter().map(|v| v * t).collect())
    }

    /// Copy with entry `i` replaced by `value`.
    pub fn with_entry(&self, i: usize, value: f64) -> Result<Spectrum> {
        if i >= self.dim() {
            return Err(Error::IndexOutOfRange { index: i, n: self.dim() });
        }
        let mut values = self.values.clone();
        values[i] = value;
        Spectrum::new(values)
    }
}

impl Deref for Spectrum {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Spectrum::new(values)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Vec<f64> {
        s.values
    }
}

/// `(σ_0, …, σ_n)` for an arbitrary finite slice.
///
/// Multiplies `∏(x + λ_i)` one factor at a time; coefficient `j` of the
/// running product is `σ_j` of the entries consumed so far.
pub fn sigma_all_slice(lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len();
    let mut s = vec![0.0; n + 1];
    s[0] = 1.0;
    for (m, &l) in lambda.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            s[j] += l * s[j - 1];
        }
    }
    s
}

/// `σ_j` of a slice; `σ_0 = 1` and `σ_j = 0` for `j > len`.
pub fn sigma_slice(j: usize, lambda: &[f64]) -> f64 {
    if j > lambda.len() {
        return 0.0;
    }
    if j == 0 {
        return 1.0;
    }
    let mut s = vec![0.0; j + 1];
    s[0] = 1.0;
    for (m, &l) in lambda.iter().enumerate() {
        for k in (1..=(m + 1).min(j)).rev() {
            s[k] += l * s[k - 1];
        }
    }
    s[j]
}

/// `σ_j` of the slice with entry `i` deleted, without bounds checks on `j`.
pub(crate) fn sigma_deleted_slice(j: usize, lambda: &[f64], i: usize) -> f64 {
    let rest: Vec<f64> = lambda
        .iter()
        .enumerate()
        .filter_map(|(m, &v)| (m != i).then_some(v))
        .collect();
    sigma_slice(j, &rest)
}

/// All `σ_j(λ|i)` for `j = 0..n-1`, as one vector per deleted index.
pub(crate) fn sigma_deleted_all(lambda: &[f64]) -> Vec<Vec<f64>> {
    (0..lambda.len())
        .map(|i| {
            let rest: Vec<f64> = lambda
                .iter()
                .enumerate()
                .filter_map(|(m, &v)| (m != i).then_some(v))
                .collect();
            sigma_all_slice(&rest)
        })
        .collect()
}

/// `(σ_0, …, σ_n)` with `σ_0 = 1`.
pub fn sigma_all(lambda: &Spectrum) -> Vec<f64> {
    sigma_all_slice(lambda)
}

/// `σ_j(λ)` for `0 <= j <= n`.
pub fn sigma(j: usize, lambda: &Spectrum) -> Result<f64> {
    if j > lambda.dim() {
        return Err(Error::DegreeOutOfRange {
            degree: j,
            min: 0,
            max: lambda.dim(),
        });
    }
    Ok(sigma_slice(j, lambda))
}

/// `σ_j(λ|i) = ∂σ_{j+1}/∂λ_i`, the degree-`j` polynomial of λ with entry
/// `i` (zero-based) removed. Requires `j <= n - 1`.
pub fn sigma_partial(j: usize, lambda: &Spectrum, i: usize) -> Result<f64> {
    let n = lambda.dim();
    if j > n - 1 {
        return Err(Error::DegreeOutOfRange {
            degree: j,
            min: 0,
            max: n - 1,
        });
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    Ok(sigma_deleted_slice(j, lambda, i))
}

/// Binomial coefficient as a float; exact for the sizes used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for m in 0..k {
        acc = acc * (n - m) as f64 / (m + 1) as f64;
    }
    acc.round()
}

/// Relative scale `max(1, max_j |σ_j|)`.
pub fn sigma_scale(sigmas: &[f64]) -> f64 {
    sigmas.iter().fold(1.0_f64, |acc, s| acc.max(s.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonCheck {
    pub residual: f64,
    pub holds: bool,
    /// Tolerance the residual was compared against.
    pub tolerance: f64,
}

/// Newton's inequality `[σ_j/C(n,j)]² ≥ [σ_{j-1}/C(n,j-1)]·[σ_{j+1}/C(n,j+1)]`
/// for `1 <= j <= n-1`. Holds for every real vector, not only cone members.
pub fn newton_check(mu: &Spectrum, j: usize) -> Result<NewtonCheck> {
    let n = mu.dim();
    if j < 1 || j > n - 1 {
        return Err(Error::DegreeOutOfRange {
            degree: j,
            min: 1,
            max: n - 1,
        });
    }
    let s = sigma_all(mu);
    let normalized: Vec<f64> = (0..=n).map(|m| s[m] / binomial(n, m)).collect();
    let residual = normalized[j] * normalized[j] - normalized[j - 1] * normalized[j + 1];
    let scale = sigma_scale(&normalized);
    let tolerance = 1e-12 * scale * scale;
    Ok(NewtonCheck {
        residual,
        holds: residual >= -tolerance,
        tolerance,
    })
}
