//! Sampled invariant suites for one operator and its cone.
//!
//! Each `*_case` function checks one sample and returns the normalized
//! defect together with the pass flag. [`audit_operator`] runs every suite
//! that applies to an operator with its own deterministic random stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{axiom_audit, smallest_sum, ConeKind, ConeSampler, ConeSpec};
use crate::error::Result;
use crate::linalg::{Matrix, SymMatrix};
use crate::operators::OperatorSpec;
use crate::symfun::{newton_check, sigma_all, sigma_partial, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest normalized defect seen.
    pub worst: f64,
}

impl SuiteResult {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), cases: 0, violations: 0, worst: 0.0 }
    }

    pub fn record(&mut self, (defect, ok): (f64, bool)) {
        self.cases += 1;
        if !ok {
            self.violations += 1;
        }
        if defect > self.worst || defect.is_nan() {
            self.worst = defect;
        }
    }

    pub fn line(&self) -> String {
        format!("{}: {} cases, {} violations, worst {:.3e}", self.name, self.cases, self.violations, self.worst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub operator: OperatorSpec,
    pub samples: usize,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub total_violations: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.total_violations == 0
    }
}

pub fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    // Gram-Schmidt on a Gaussian matrix.
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= d * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.iter().map(|x| x / norm).collect());
        }
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect();
    Matrix::from_rows(&rows).expect("square by construction")
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> SymMatrix {
    let mut a = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            a.set(i, j, rng.sample(StandardNormal));
        }
    }
    a
}

/// `σ_j = σ_{j−1}(λ|i)λ_i + σ_j(λ|i)`, relative `1e−10`.
pub fn splitting_case(lambda: &Spectrum) -> Result<(f64, bool)> {
    let n = lambda.len();
    let s = sigma_all(lambda);
    let scale = s.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 1..=n {
            let lower = sigma_partial(j - 1, lambda, i)?;
            let rest = if j < n { sigma_partial(j, lambda, i)? } else { 0.0 };
            worst = worst.max((s[j] - (lower * lambda[i] + rest)).abs() / scale);
        }
    }
    Ok((worst, worst <= 1e-10))
}

/// Newton's inequality for every `1 ≤ j < n`.
pub fn newton_case(mu: &Spectrum) -> Result<(f64, bool)> {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for j in 1..mu.len() {
        let c = newton_check(mu, j)?;
        ok &= c.holds;
        worst = worst.max(-c.residual / c.tolerance.max(f64::MIN_POSITIVE));
    }
    Ok((worst.max(0.0), ok))
}

/// `|Σ f_i λ_i − f| ≤ 1e−10·|f|`.
pub fn homogeneity_case(op: &OperatorSpec, lambda: &Spectrum) -> Result<(f64, bool)> {
    let f = op.eval(lambda)?;
    let d = op.homogeneity_residual(lambda)? / f.abs();
    Ok((d, d <= 1e-10))
}

/// Distance from `λ` to the cone boundary along `−e_i`, to relative `1e−3`.
/// Increasing an entry never leaves the cone, so only the downward ray matters.
pub fn boundary_distance(cone: &ConeSpec, lambda: &[f64], i: usize) -> Result<f64> {
    let inside = |t: f64| -> Result<bool> {
        let mut v = lambda.to_vec();
        v[i] -= t;
        Ok(cone.cone_margin(&v)? > 0.0)
    };
    let mut hi = lambda.iter().fold(1e-300_f64, |m, v| m.max(v.abs()));
    while inside(hi)? {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Central differences of `f` against the analytic gradient, relative `1e−6`.
/// The step is `1e−5` times the distance to the cone boundary along the
/// perturbed coordinate, capped at `max|λ|`.
pub fn gradient_case(op: &OperatorSpec, lambda: &Spectrum) -> Result<(f64, bool)> {
    let g = op.grad(lambda)?;
    let cap = lambda.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for i in 0..op.n {
        let h = 1e-5 * boundary_distance(&op.cone, lambda, i)?.min(cap);
        let p = op.eval_slice(&lambda.with_entry(i, lambda[i] + h)?)?;
        let m = op.eval_slice(&lambda.with_entry(i, lambda[i] - h)?)?;
        worst = worst.max(((p - m) / (2.0 * h) - g[i]).abs() / gmax);
    }
    Ok((worst, worst <= 1e-6))
}

/// `f(tλ + (1−t)μ) ≥ t f(λ) + (1−t) f(μ) − 1e−10·scale`.
pub fn concavity_case(op: &OperatorSpec, lambda: &Spectrum, mu: &Spectrum, t: f64) -> Result<(f64, bool)> {
    let mix: Vec<f64> = lambda.iter().zip(mu.iter()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    let fl = op.eval(lambda)?;
    let fm = op.eval(mu)?;
    let fmix = op.eval_slice(&mix)?;
    let scale = fl.abs().max(fm.abs()).max(1.0);
    let defect = (t * fl + (1.0 - t) * fm - fmix) / scale;
    Ok((defect.max(0.0), defect <= 1e-10))
}

/// `min f_i > 0` and `f(λ + τ) > f(λ)` for a positive shift `τ`.
pub fn ellipticity_case(op: &OperatorSpec, lambda: &Spectrum, tau: &[f64]) -> Result<(f64, bool)> {
    let g = op.grad(lambda)?;
    let min_g = g.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = lambda.iter().zip(tau).map(|(a, b)| a + b).collect();
    let gain = op.eval_slice(&shifted)? - op.eval(lambda)?;
    Ok((if min_g > 0.0 { 0.0 } else { -min_g }, min_g > 0.0 && gain > 0.0))
}

/// `tr(L·B)` at `A = Q diag(values) Qᵀ` against a central difference of
/// `F(A + tB)`, relative `1e−5`. A step that leaves the cone is skipped
/// and counts as a pass.
pub fn linearization_case(op: &OperatorSpec, q: &Matrix, values: &[f64], b: &SymMatrix) -> Result<(f64, bool)> {
    let n = op.n;
    let a = SymMatrix::from_spectral(q, values);
    let lin = op.linearize(&a)?;
    let mut analytic = 0.0;
    for i in 0..n {
        for j in 0..n {
            analytic += lin.matrix.get(i, j) * b.get(i, j);
        }
    }
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let t = 1e-6 * scale / b.max_abs();
    let (Ok(fp), Ok(fm)) = (op.eval_matrix(&a.add(&b.scaled(t))), op.eval_matrix(&a.add(&b.scaled(-t)))) else {
        return Ok((0.0, true));
    };
    let fd = (fp - fm) / (2.0 * t);
    let norm = lin.gradient.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * b.max_abs() * n as f64;
    let defect = (fd - analytic).abs() / norm;
    Ok((defect, defect <= 1e-5))
}

/// Brute force over all `p`-subsets against the smallest-entries shortcut,
/// and cone membership against the brute-force minimum.
pub fn sorted_reduction_case(lambda: &Spectrum, p: usize) -> Result<(f64, bool)> {
    let n = lambda.len();
    let cone = ConeSpec::gamma_hat_p(p, n)?;
    let mut brute = f64::INFINITY;
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize == p {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| lambda[i]).sum();
            brute = brute.min(s);
        }
    }
    let fast = smallest_sum(lambda, p);
    let scale = lambda.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let defect = (brute - fast).abs() / scale;
    Ok((defect, (brute > 0.0) == cone.contains(lambda, 0.0)? && defect <= 1e-12 * n as f64))
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Result<Spectrum> {
    Spectrum::new((0..n).map(|_| rng.random_range(-bound..bound)).collect())
}

type Suite = fn(&OperatorSpec, usize, &mut ChaCha8Rng) -> Result<SuiteResult>;

const SUITES: [(&str, Suite); 8] = [
    ("splitting identity", |op, m, rng| {
        let mut res = SuiteResult::new("splitting identity");
        for _ in 0..m {
            res.record(splitting_case(&uniform(rng, op.n, 1e3)?)?);
        }
        Ok(res)
    }),
    ("Newton inequality", |op, m, rng| {
        let mut res = SuiteResult::new("Newton inequality");
        for _ in 0..m {
            res.record(newton_case(&uniform(rng, op.n, 10.0)?)?);
        }
        Ok(res)
    }),
    ("homogeneity", |op, m, rng| {
        let mut res = SuiteResult::new("homogeneity");
        let mut sampler = ConeSampler::new(op.cone, rng.random());
        for _ in 0..m {
            res.record(homogeneity_case(op, &sampler.sample())?);
        }
        Ok(res)
    }),
    ("gradient vs FD", |op, m, rng| {
        let mut res = SuiteResult::new("gradient vs FD");
        let mut sampler = ConeSampler::new(op.cone, rng.random());
        for _ in 0..m {
            res.record(gradient_case(op, &sampler.sample())?);
        }
        Ok(res)
    }),
    ("concavity", |op, m, rng| {
        let mut res = SuiteResult::new("concavity");
        let mut sampler = ConeSampler::new(op.cone, rng.random());
        for _ in 0..m {
            let (l, mu) = (sampler.sample(), sampler.sample());
            res.record(concavity_case(op, &l, &mu, rng.random_range(0.0..1.0))?);
        }
        Ok(res)
    }),
    ("ellipticity and monotonicity", |op, m, rng| {
        let mut res = SuiteResult::new("ellipticity and monotonicity");
        let mut sampler = ConeSampler::new(op.cone, rng.random());
        for _ in 0..m {
            let tau: Vec<f64> = (0..op.n).map(|_| rng.random_range(1e-3..1.0)).collect();
            res.record(ellipticity_case(op, &sampler.sample(), &tau)?);
        }
        Ok(res)
    }),
    ("linearization vs FD Jacobian", |op, m, rng| {
        let mut res = SuiteResult::new("linearization vs FD Jacobian");
        let mut sampler = ConeSampler::new(op.cone, rng.random());
        for case in 0..m {
            let mut values = sampler.sample().sorted_descending().into_vec();
            if case % 2 == 0 {
                // A repeated top pair stays in the cone.
                values[1] = values[0];
            }
            let q = random_orthogonal(rng, op.n);
            let b = random_symmetric(rng, op.n);
            res.record(linearization_case(op, &q, &values, &b)?);
        }
        Ok(res)
    }),
    ("sorted reduction for p-sum cones", |op, m, rng| {
        let mut res = SuiteResult::new("sorted reduction for p-sum cones");
        let ConeKind::GammaHatP(p) = op.cone.kind else { return Ok(res) };
        for _ in 0..m {
            res.record(sorted_reduction_case(&uniform(rng, op.n, 5.0)?, p)?);
        }
        Ok(res)
    }),
];

/// Every suite that applies to `op`, with `samples` cases each, plus the
/// cone axiom audit of `op.cone`. Suite `i` draws from stream `i` of a
/// ChaCha8 generator seeded with `seed`.
pub fn audit_operator(op: &OperatorSpec, samples: usize, seed: u64) -> Result<AuditReport> {
    let mut suites: Vec<SuiteResult> = SUITES
        .par_iter()
        .enumerate()
        .map(|(i, (_, suite))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            suite(op, samples, &mut rng)
        })
        .collect::<Result<_>>()?;
    suites.retain(|s| s.cases > 0);

    let axioms = axiom_audit(&op.cone, samples, seed)?;
    suites.push(SuiteResult {
        name: format!("cone axioms [{}]", op.cone),
        cases: axioms.samples,
        violations: axioms.total_violations(),
        worst: 0.0,
    });
    let total_violations = suites.iter().map(|s| s.violations).sum();
    Ok(AuditReport { operator: *op, samples, seed, suites, total_violations })
}
