//! Gårding cones `Γ_k` and the p-sum cones `Γ̂_p`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symfun::{sigma_all_slice, Spectrum};
use crate::MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", content = "parameter")]
pub enum ConeKind {
    /// `{σ_1 > 0, …, σ_k > 0}`.
    GammaK(usize),
    /// Every sum of `p` distinct entries is positive.
    GammaHatP(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub n: usize,
}

impl fmt::Display for ConeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ConeKind::GammaK(k) => write!(f, "Gamma_{k} (n={})", self.n),
            ConeKind::GammaHatP(p) => write!(f, "GammaHat_{p} (n={})", self.n),
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if (2..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

impl ConeSpec {
    pub fn gamma_k(k: usize, n: usize) -> Result<Self> {
        check_dim(n)?;
        if k < 1 || k > n {
            return Err(Error::InvalidCone(format!("Gamma_k needs 1 <= k <= n, got k={k}, n={n}")));
        }
        Ok(Self { kind: ConeKind::GammaK(k), n })
    }

    pub fn gamma_hat_p(p: usize, n: usize) -> Result<Self> {
        check_dim(n)?;
        if p < 1 || p > n {
            return Err(Error::InvalidCone(format!("GammaHat_p needs 1 <= p <= n, got p={p}, n={n}")));
        }
        Ok(Self { kind: ConeKind::GammaHatP(p), n })
    }

    /// `Γ_n`, the open positive orthant.
    pub fn positive_orthant(n: usize) -> Result<Self> {
        Self::gamma_k(n, n)
    }

    /// Signed distance-like margin: `min_{j<=k} σ_j` for `Γ_k`, the smallest
    /// p-sum for `Γ̂_p`. Membership with margin `m` is `cone_margin > m`.
    pub fn cone_margin(&self, lambda: &[f64]) -> Result<f64> {
        if lambda.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: lambda.len() });
        }
        Ok(self.margin_unchecked(lambda))
    }

    pub(crate) fn margin_unchecked(&self, lambda: &[f64]) -> f64 {
        match self.kind {
            ConeKind::GammaK(k) => {
                let s = sigma_all_slice(lambda);
                s[1..=k].iter().copied().fold(f64::INFINITY, f64::min)
            }
            ConeKind::GammaHatP(p) => smallest_sum(lambda, p),
        }
    }

    /// Strict membership with slack: every defining quantity exceeds `margin`.
    pub fn contains(&self, lambda: &Spectrum, margin: f64) -> Result<bool> {
        Ok(self.cone_margin(lambda)? > margin)
    }

    pub(crate) fn contains_slice(&self, lambda: &[f64], margin: f64) -> bool {
        lambda.len() == self.n && self.margin_unchecked(lambda) > margin
    }
}

/// Sum of the `p` smallest entries.
pub fn smallest_sum(lambda: &[f64], p: usize) -> f64 {
    let mut sorted = lambda.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().take(p).sum()
}

/// Deterministic rejection sampler for the interior of a cone.
///
/// Draws `s·(c·1 + g)` with `g` standard normal, `c` and `s` log-uniform,
/// and rejects non-members.
#[derive(Debug)]
pub struct ConeSampler {
    cone: ConeSpec,
    rng: ChaCha8Rng,
    accepted: usize,
    rejected: usize,
}

impl ConeSampler {
    pub fn new(cone: ConeSpec, seed: u64) -> Self {
        Self {
            cone,
            rng: ChaCha8Rng::seed_from_u64(seed),
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn cone(&self) -> ConeSpec {
        self.cone
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn sample(&mut self) -> Spectrum {
        let n = self.cone.n;
        loop {
            let c = log_uniform(&mut self.rng, 0.05, 5.0);
            let s = log_uniform(&mut self.rng, 0.1, 10.0);
            let values: Vec<f64> = (0..n)
                .map(|_| {
                    let g: f64 = self.rng.sample(StandardNormal);
                    s * (c + g)
                })
                .collect();
            if self.cone.contains_slice(&values, 0.0) {
                self.accepted += 1;
                return Spectrum::new(values).expect("finite sample");
            }
            self.rejected += 1;
        }
    }

    pub fn rejection_rate(&self) -> f64 {
        let total = self.accepted + self.rejected;
        if total == 0 {
            0.0
        } else {
            self.rejected as f64 / total as f64
        }
    }
}

pub(crate) fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let t: f64 = rng.random();
    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
}

/// Positive vector with log-uniform entries in `[lo, hi]`.
pub(crate) fn sample_positive<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| log_uniform(rng, lo, hi)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomAudit {
    pub cone: ConeSpec,
    pub samples: usize,
    pub seed: u64,
    pub positivity_violations: usize,
    pub invariance_violations: usize,
    pub convexity_violations: usize,
    pub inclusion_violations: usize,
    pub rejection_rate: f64,
}

impl AxiomAudit {
    pub fn total_violations(&self) -> usize {
        self.positivity_violations
            + self.invariance_violations
            + self.convexity_violations
            + self.inclusion_violations
    }
}

/// Samples the defining properties of a convex invariant cone: `Γ + Γ_n ⊂ Γ`,
/// permutation invariance, convexity, and `Γ ⊂ Γ_1`.
pub fn axiom_audit(cone: &ConeSpec, sample_count: usize, seed: u64) -> Result<AxiomAudit> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be at least 1".into()));
    }
    let mut sampler = ConeSampler::new(*cone, seed);
    let mut audit = AxiomAudit {
        cone: *cone,
        samples: sample_count,
        seed,
        positivity_violations: 0,
        invariance_violations: 0,
        convexity_violations: 0,
        inclusion_violations: 0,
        rejection_rate: 0.0,
    };
    let n = cone.n;
    for _ in 0..sample_count {
        let lambda = sampler.sample();
        let mu = sampler.sample();
        let rng = sampler.rng();
        let tau = sample_positive(rng, n, 1e-3, 1e3);
        let t: f64 = rng.random();
        let mut perm = lambda.to_vec();
        perm.shuffle(rng);

        let shifted: Vec<f64> = lambda.iter().zip(&tau).map(|(a, b)| a + b).collect();
        if !cone.contains_slice(&shifted, 0.0) {
            audit.positivity_violations += 1;
        }
        if !cone.contains_slice(&perm, 0.0) {
            audit.invariance_violations += 1;
        }
        let mix: Vec<f64> = lambda
            .iter()
            .zip(mu.iter())
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        if !cone.contains_slice(&mix, 0.0) {
            audit.convexity_violations += 1;
        }
        if lambda.iter().sum::<f64>() <= 0.0 {
            audit.inclusion_violations += 1;
        }
    }
    audit.rejection_rate = sampler.rejection_rate();
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::from_slice(v).unwrap()
    }

    #[test]
    fn membership_examples() {
        let g2 = ConeSpec::gamma_k(2, 3).unwrap();
        assert!(!g2.contains(&spec(&[-1.0, 2.0, 2.0]), 0.0).unwrap());
        for k in 1..=4 {
            let c = ConeSpec::gamma_k(k, 4).unwrap();
            assert!(c.contains(&spec(&[1.0; 4]), 0.0).unwrap());
        }
        let h2 = ConeSpec::gamma_hat_p(2, 3).unwrap();
        assert!(h2.contains(&spec(&[-1.0, 2.0, 3.0]), 0.0).unwrap());
        assert!(!h2.contains(&spec(&[-2.0, 2.0, 3.0]), 0.0).unwrap());
    }

    #[test]
    fn margin_is_strict() {
        let g1 = ConeSpec::gamma_k(1, 2).unwrap();
        assert!(!g1.contains(&spec(&[1.0, -1.0]), 0.0).unwrap());
        assert!(g1.contains(&spec(&[1.0, -0.5]), 0.0).unwrap());
        assert!(!g1.contains(&spec(&[1.0, -0.5]), 0.5).unwrap());
    }

    #[test]
    fn parameter_validation() {
        assert!(ConeSpec::gamma_k(0, 3).is_err());
        assert!(ConeSpec::gamma_k(4, 3).is_err());
        assert!(ConeSpec::gamma_hat_p(4, 3).is_err());
        assert!(ConeSpec::gamma_k(1, 13).is_err());
        let c = ConeSpec::gamma_k(2, 3).unwrap();
        assert!(matches!(
            c.contains(&spec(&[1.0, 1.0]), 0.0),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn audits_find_no_violations() {
        for cone in [
            ConeSpec::gamma_k(2, 3).unwrap(),
            ConeSpec::gamma_k(1, 5).unwrap(),
            ConeSpec::gamma_hat_p(2, 4).unwrap(),
        ] {
            let audit = axiom_audit(&cone, 10_000, 11).unwrap();
            assert_eq!(audit.total_violations(), 0, "{audit:?}");
            assert!(audit.rejection_rate < 1.0);
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let cone = ConeSpec::gamma_k(2, 4).unwrap();
        let mut a = ConeSampler::new(cone, 5);
        let mut b = ConeSampler::new(cone, 5);
        for _ in 0..20 {
            assert_eq!(a.sample(), b.sample());
        }
    }
}
