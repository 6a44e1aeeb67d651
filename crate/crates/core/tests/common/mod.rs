//! Sampled identity and bridge suites shared by the property tests and the
//! acceptance target. Each suite returns the number of cases, the number of
//! violations and the worst normalized defect seen.

#![allow(dead_code)]

pub use hessian_core::audit::{random_orthogonal, random_symmetric, SuiteResult};
use hessian_core::audit::{
    concavity_case, ellipticity_case, gradient_case, homogeneity_case, linearization_case, newton_case,
    sorted_reduction_case, splitting_case,
};
use hessian_core::cones::{axiom_audit, smallest_sum, ConeSampler, ConeSpec};
use hessian_core::conditions::{check_cns, check_condition_d, check_k_hessian_lower_bound, check_pma_partial_sums};
use hessian_core::operators::{condition_n_constants, condition_n_lower_bound, OperatorSpec};
use hessian_core::symfun::{sigma_all, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIMS: std::ops::RangeInclusive<usize> = 2..=6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

/// One operator of the given family with a random admissible parameter.
pub fn random_operator(rng: &mut ChaCha8Rng, family: usize, n: usize) -> OperatorSpec {
    match family {
        0 => OperatorSpec::monge_ampere(n),
        1 => OperatorSpec::k_hessian(rng.random_range(1..=n), n),
        2 => {
            let k = rng.random_range(2..=n);
            OperatorSpec::hessian_quotient(k, rng.random_range(1..k), n)
        }
        _ => OperatorSpec::p_monge_ampere(rng.random_range(1..=n), n),
    }
    .unwrap()
}

pub const FAMILIES: [&str; 4] = ["monge_ampere", "k_hessian", "hessian_quotient", "p_monge_ampere"];

/// Splitting identity for entries in `[−10³, 10³]`.
pub fn splitting_suite(cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new("splitting identity");
    let mut rng = rng(seed);
    for n in DIMS {
        for _ in 0..cases_per_n {
            res.record(splitting_case(&Spectrum::new(uniform_vec(&mut rng, n, 1e3)).unwrap()).unwrap());
        }
    }
    res
}

/// Newton's inequality on arbitrary vectors in `[−10, 10]ⁿ`.
pub fn newton_suite(cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new("Newton inequality");
    let mut rng = rng(seed);
    for n in DIMS {
        for _ in 0..cases_per_n {
            res.record(newton_case(&Spectrum::new(uniform_vec(&mut rng, n, 10.0)).unwrap()).unwrap());
        }
    }
    res
}

fn for_family_samples<F: FnMut(&OperatorSpec, &Spectrum, &mut ChaCha8Rng, &mut ConeSampler)>(
    family: usize,
    cases_per_n: usize,
    seed: u64,
    mut body: F,
) {
    let mut rng = rng(seed);
    for n in DIMS {
        for _ in 0..cases_per_n {
            let op = random_operator(&mut rng, family, n);
            let mut sampler = ConeSampler::new(op.cone, rng.random());
            let lambda = sampler.sample();
            body(&op, &lambda, &mut rng, &mut sampler);
        }
    }
}

pub fn homogeneity_suite(family: usize, cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new(format!("homogeneity [{}]", FAMILIES[family]));
    for_family_samples(family, cases_per_n, seed, |op, lambda, _, _| {
        res.record(homogeneity_case(op, lambda).unwrap());
    });
    res
}

pub fn gradient_suite(family: usize, cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new(format!("gradient vs FD [{}]", FAMILIES[family]));
    for_family_samples(family, cases_per_n, seed, |op, lambda, _, _| {
        res.record(gradient_case(op, lambda).unwrap());
    });
    res
}

pub fn concavity_suite(family: usize, cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new(format!("concavity [{}]", FAMILIES[family]));
    for_family_samples(family, cases_per_n, seed, |op, lambda, rng, sampler| {
        let mu = sampler.sample();
        res.record(concavity_case(op, lambda, &mu, rng.random_range(0.0..1.0)).unwrap());
    });
    res
}

pub fn ellipticity_suite(family: usize, cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new(format!("ellipticity and monotonicity [{}]", FAMILIES[family]));
    for_family_samples(family, cases_per_n, seed, |op, lambda, rng, _| {
        let tau: Vec<f64> = (0..op.n).map(|_| rng.random_range(1e-3..1.0)).collect();
        res.record(ellipticity_case(op, lambda, &tau).unwrap());
    });
    res
}

/// Cone axioms through `axiom_audit` for every cone of the four families' parameters.
pub fn cone_axiom_suite(samples: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new("cone axioms");
    for n in DIMS {
        for k in 1..=n {
            for cone in [ConeSpec::gamma_k(k, n).unwrap(), ConeSpec::gamma_hat_p(k, n).unwrap()] {
                let audit = axiom_audit(&cone, samples, seed + n as u64 * 31 + k as u64).unwrap();
                res.cases += audit.samples;
                res.violations += audit.total_violations();
            }
        }
    }
    res
}

/// Brute force over all `p`-subsets against the smallest-entries shortcut.
pub fn sorted_reduction_suite(cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new("sorted reduction for p-sum cones");
    let mut rng = rng(seed);
    for n in DIMS {
        for _ in 0..cases_per_n {
            let lambda = Spectrum::new(uniform_vec(&mut rng, n, 5.0)).unwrap();
            let p = rng.random_range(1..=n);
            res.record(sorted_reduction_case(&lambda, p).unwrap());
        }
    }
    res
}

/// Half the matrices carry a repeated eigenvalue pair.
pub fn linearization_suite(family: usize, cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new(format!("linearization vs FD Jacobian [{}]", FAMILIES[family]));
    let mut case = 0usize;
    for_family_samples(family, cases_per_n, seed, |op, lambda, rng, _| {
        let mut values = lambda.sorted_descending().into_vec();
        if case % 2 == 0 {
            values[1] = values[0];
        }
        case += 1;
        let q = random_orthogonal(rng, op.n);
        let b = random_symmetric(rng, op.n);
        res.record(linearization_case(op, &q, &values, &b).unwrap());
    });
    res
}

/// Condition N with `(N1, N2)` from `d`: `min f_i ≥ 1/(N1·C^{N2})`, `C = Σ f_i`, on `f = 1`.
pub fn condition_n_suite(op: &OperatorSpec, d: f64, cases: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new(format!("condition N [{op}]"));
    let constants = condition_n_constants(op, d).unwrap();
    let mut sampler = ConeSampler::new(op.cone, seed);
    for _ in 0..cases {
        let lambda = op.normalize(&sampler.sample()).unwrap();
        let g = op.grad(&lambda).unwrap();
        let c: f64 = g.iter().sum();
        let bound = condition_n_lower_bound(&constants, c);
        let min_g = g.iter().copied().fold(f64::INFINITY, f64::min);
        res.record(((bound - min_g).max(0.0) / bound, min_g >= bound));
    }
    res
}

/// CNS with `R` ⇒ condition D with `(2R, 2)` on spectra normalized to `f = 1`.
pub fn cns_d_bridge(cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new("CNS => D with (2R, 2)");
    let mut rng = rng(seed);
    let mut attempts = 0;
    for n in DIMS {
        let mut done = 0;
        while done < cases_per_n {
            attempts += 1;
            assert!(attempts < 1000 * cases_per_n * 5, "CNS bridge sampler starved");
            let family = rng.random_range(0..4);
            let op = random_operator(&mut rng, family, n);
            let mut sampler = ConeSampler::new(op.cone, rng.random());
            let lambda = op.normalize(&sampler.sample()).unwrap();
            let r = 10f64.powf(rng.random_range(-1.0..2.0));
            if !check_cns(&op.cone, &lambda, r).unwrap().satisfied {
                continue;
            }
            done += 1;
            let d = check_condition_d(&op, &lambda, 2.0 * r, 2.0).unwrap();
            res.record(((-d.worst_margin).max(0.0), d.satisfied));
        }
    }
    res
}

/// `σ_{k+1} ≥ −Aσ_k` on `Γ_k` ⇒ `(λ', R) ∈ Γ_k` (and `Γ_{k−1}`) for `R > A`.
pub fn k_hessian_bridge(cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new("k-Hessian lower bound => (lambda', R) in Gamma_k");
    let mut rng = rng(seed);
    for n in DIMS {
        let mut done = 0;
        while done < cases_per_n {
            let k = rng.random_range(1..=n);
            let mut sampler = ConeSampler::new(ConeSpec::gamma_k(k, n).unwrap(), rng.random());
            let lambda = sampler.sample();
            let s = sigma_all(&lambda);
            let next = if k < n { s[k + 1] } else { 0.0 };
            // Smallest A for which the hypothesis holds, inflated at random.
            let a_min = (-next / s[k]).max(0.0);
            let a = a_min * rng.random_range(1.0..3.0);
            let rep = check_k_hessian_lower_bound(&lambda, k, a).unwrap();
            if !rep.satisfied {
                continue;
            }
            done += 1;
            let ok = rep.conclusion_holds == Some(true) && rep.intermediate_holds == Some(true);
            res.record((if ok { 0.0 } else { 1.0 }, ok));
        }
    }
    res
}

/// `(p−1)`-sums `≥ −A` on `Γ̂_p` ⇒ CNS for `Γ̂_p` with `R > A`, and
/// `(p−1)`-plurisubharmonic (`A = 0`) ⇒ CNS with `R = 0⁺`.
pub fn pma_bridge(cases_per_n: usize, seed: u64) -> SuiteResult {
    let mut res = SuiteResult::new("(p-1)-sum bound => CNS for GammaHat_p");
    let mut rng = rng(seed);
    for n in DIMS {
        let mut done = 0;
        while done < cases_per_n {
            let p = rng.random_range(2..=n);
            let mut sampler = ConeSampler::new(ConeSpec::gamma_hat_p(p, n).unwrap(), rng.random());
            let lambda = sampler.sample();
            let low = smallest_sum(&lambda, p - 1);
            let a = if done % 2 == 0 && low > 0.0 { 0.0 } else { (-low).max(0.0) * rng.random_range(1.0..2.0) };
            let rep = check_pma_partial_sums(&lambda, p, a).unwrap();
            if !rep.satisfied {
                continue;
            }
            done += 1;
            let mut ok = rep.conclusion_holds == Some(true) && rep.intermediate_holds == Some(true);
            if a == 0.0 {
                let cns = check_cns(&ConeSpec::gamma_hat_p(p, n).unwrap(), &lambda, 1e-12).unwrap();
                ok &= cns.satisfied;
            }
            res.record((if ok { 0.0 } else { 1.0 }, ok));
        }
    }
    res
}
