//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any failure.

mod common;

use std::time::{Duration, Instant};

use common::*;
use hessian_core::harness::{
    blowdown, default_exponents_for, liouville_probe, liouville_probe_fn, max_error,
    observed_orders, refinement_study, AnalyticSource, BlowdownSource,
};
use hessian_core::linalg::SymMatrix;
use hessian_core::operators::{condition_n_constants, estimate_garding_d, OperatorSpec};
use hessian_core::solver::{solve, DomainSpec};

/// Errors below this are rounding noise and carry no order information.
const NOISE_FLOOR: f64 = 1e-12;

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, title: &str, elapsed: Duration, limit: Option<f64>, outcome: Outcome) -> bool {
    let secs = elapsed.as_secs_f64();
    let in_time = limit.is_none_or(|l| secs <= l);
    let pass = outcome.pass && in_time;
    let budget = limit.map(|l| format!(" (limit {l:.0} s)")).unwrap_or_default();
    println!(
        "{} [{id}] {title}: {}; {secs:.2} s{budget}",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail
    );
    pass
}

fn suites_pass(suites: &[SuiteResult]) -> Outcome {
    for s in suites {
        println!("      {}", s.line());
    }
    let cases: usize = suites.iter().map(|s| s.cases).sum();
    let violations: usize = suites.iter().map(|s| s.violations).sum();
    Outcome { pass: violations == 0, detail: format!("{cases} cases, {violations} violations") }
}

fn criterion_1_and_6() -> (bool, bool) {
    let ma = OperatorSpec::monge_ampere(2).unwrap();
    let disk = DomainSpec::unit_ball(2).unwrap();
    let h_list = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let (alpha, beta) = default_exponents_for(&ma);

    let start = Instant::now();
    let study = refinement_study(&ma, &disk, &h_list, alpha, beta);
    let elapsed = start.elapsed();
    let study = match study {
        Ok(s) => s,
        Err(e) => {
            let o = Outcome { pass: false, detail: format!("solve failed: {e}") };
            let a = report(1, "radial oracle, Monge-Ampere n=2", elapsed, Some(60.0), o);
            let o = Outcome { pass: false, detail: "no solves".into() };
            return (a, report(6, "estimate functional on disk solves", elapsed, None, o));
        }
    };
    let exact = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0);
    let errors: Vec<f64> = study.fields.iter().map(|f| max_error(f, exact)).collect();
    let converged = study.rows.iter().all(|r| r.solve.residual_max <= 1e-10 && r.solve.admissible);
    let above: Vec<usize> = (0..errors.len()).filter(|&i| errors[i] > NOISE_FLOOR).collect();
    let pairs: Vec<(usize, usize)> = above.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| b - a == 1).collect();
    let orders: Vec<f64> = pairs
        .iter()
        .flat_map(|&(a, b)| observed_orders(&h_list[a..=b], &errors[a..=b]))
        .collect();
    // Once the error reaches the noise floor it must stay there.
    let floor_is_sticky = errors.windows(2).all(|w| w[0] > NOISE_FLOOR || w[1] <= NOISE_FLOOR);
    let order_ok = orders.iter().all(|&o| o >= 1.5) && floor_is_sticky;
    let finest = *errors.last().unwrap();
    let order_text = if orders.is_empty() {
        "orders n/a (all errors at rounding level: discretization exact on the quadratic)".to_string()
    } else {
        format!("orders {orders:.2?}")
    };
    let o = Outcome {
        pass: converged && order_ok && finest <= 5e-4,
        detail: format!("errors [{}], {order_text}, finest {finest:.3e} <= 5e-4", sci(&errors)),
    };
    let c1 = report(1, "radial oracle, Monge-Ampere n=2, h=1/16,1/32,1/64", elapsed, Some(60.0), o);

    let start = Instant::now();
    let finite = study.rows.iter().all(|r| r.estimate.functional_sup.is_finite());
    let ratio = study.last_ratio().unwrap_or(f64::NAN);
    let c0 = study.rows.iter().all(|r| r.c0.holds);
    let ordering = study.rows.iter().all(|r| r.ordering.holds);
    let sups: Vec<f64> = study.rows.iter().map(|r| r.estimate.functional_sup).collect();
    let o = Outcome {
        pass: finite && ratio <= 0.1 && c0 && ordering,
        detail: format!(
            "alpha={alpha}, beta={beta}, sups {sups:.6?}, last ratio {ratio:.3e} <= 0.1, c0 {c0} (C={}), u >= subsolution {ordering}",
            study.rows[0].c0.c
        ),
    };
    let c6 = report(6, "estimate functional on the disk solves", start.elapsed(), None, o);
    (c1, c6)
}

fn criterion_2() -> bool {
    let start = Instant::now();
    let op = OperatorSpec::k_hessian(2, 3).unwrap();
    let ball = DomainSpec::unit_ball(3).unwrap();
    let outcome = match solve(&op, &ball, 1.0 / 16.0, 1e-10, 50) {
        Ok(rep) => {
            let u0 = rep.field.interpolate(&[0.0, 0.0, 0.0]).unwrap();
            let target = -1.0 / (2.0 * 3f64.sqrt());
            let err = (u0 - target).abs();
            Outcome {
                pass: err <= 5e-3 && rep.admissible,
                detail: format!("u(0) = {u0:.8}, target {target:.8}, |diff| {err:.3e} <= 5e-3, newton {}", rep.newton_iterations),
            }
        }
        Err(e) => Outcome { pass: false, detail: format!("solve failed: {e}") },
    };
    report(2, "radial oracle, k-Hessian k=2 n=3, h=1/16", start.elapsed(), Some(120.0), outcome)
}

fn criterion_3() -> bool {
    let start = Instant::now();
    let mut suites = vec![
        splitting_suite(10_000, 301),
        newton_suite(20_000, 302),
        sorted_reduction_suite(2_000, 303),
        cone_axiom_suite(10_000, 304),
    ];
    for family in 0..4 {
        let seed = 310 + 10 * family as u64;
        suites.push(homogeneity_suite(family, 10_000, seed));
        suites.push(gradient_suite(family, 2_000, seed + 1));
        suites.push(concavity_suite(family, 10_000, seed + 2));
        suites.push(ellipticity_suite(family, 10_000, seed + 3));
        suites.push(linearization_suite(family, 2_000, seed + 4));
    }
    report(3, "identity suite", start.elapsed(), Some(120.0), suites_pass(&suites))
}

fn criterion_4() -> bool {
    let start = Instant::now();
    let suites = vec![cns_d_bridge(2_000, 401), k_hessian_bridge(2_000, 402), pma_bridge(2_000, 403)];
    report(4, "condition-bridge suite", start.elapsed(), Some(60.0), suites_pass(&suites))
}

fn criterion_5() -> bool {
    let start = Instant::now();
    let ma = OperatorSpec::monge_ampere(3).unwrap();
    let outcome = match estimate_garding_d(&ma, 100_000, 501) {
        Ok(est) => {
            let d = est.d_hat;
            let c = condition_n_constants(&ma, d).unwrap();
            let suite = condition_n_suite(&ma, d, 10_000, 502);
            println!("      {}", suite.line());
            Outcome {
                pass: (0.95..=1.05).contains(&d) && suite.violations == 0,
                detail: format!("d_hat {d:.6} in [0.95, 1.05], (N1, N2) = ({:.4}, {}), condition N violations {}", c.n1, c.n2, suite.violations),
            }
        }
        Err(e) => Outcome { pass: false, detail: format!("estimate failed: {e}") },
    };
    report(5, "condition-N constants, Monge-Ampere n=3", start.elapsed(), Some(120.0), outcome)
}

fn criterion_7() -> bool {
    let start = Instant::now();
    let r_list = [1.0, 2.0, 4.0, 8.0];
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [0.5, 2.0] {
        let src = BlowdownSource::Analytic(AnalyticSource::radial(a, 2).unwrap());
        match blowdown(&src, &r_list, 81) {
            Ok(rep) => {
                let d = rep.max_invariance_defect();
                let eq = rep.max_hessian_equivariance_defect().unwrap();
                pass &= d <= 1e-12 && eq <= 1e-10 && rep.all_diameters_ok();
                parts.push(format!("a={a}: invariance {d:.1e}, equivariance {eq:.1e}"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("a={a}: {e}"));
            }
        }
    }
    let m = SymMatrix::from_rows(&[vec![1.0, 0.3, 0.0], vec![0.3, 2.0, -0.2], vec![0.0, -0.2, 0.8]]).unwrap();
    let min_eig = hessian_core::linalg::eigen_sym(&m).values[2];
    let src = AnalyticSource { hessian: m, bump: None, growth_c: 2.0 / min_eig };
    match blowdown(&BlowdownSource::Analytic(src), &r_list, 41) {
        Ok(rep) => {
            let diams: Vec<f64> = rep.rows.iter().map(|r| r.diameter).collect();
            let eq = rep.max_hessian_equivariance_defect().unwrap();
            pass &= rep.all_diameters_ok() && eq <= 1e-10 && rep.max_invariance_defect() <= 1e-12;
            parts.push(format!(
                "3D quadratic C={:.4}: diam {diams:.4?} <= {:.4}, equivariance {eq:.1e}",
                rep.growth_c, rep.diameter_bound
            ));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("3D quadratic: {e}"));
        }
    }
    report(7, "blow-down suite, R in {1,2,4,8}", start.elapsed(), Some(30.0), Outcome { pass, detail: parts.join("; ") })
}

fn criterion_8() -> bool {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    let disk = DomainSpec::unit_ball(2).unwrap();
    let ball = DomainSpec::unit_ball(3).unwrap();
    let quad2 = |x: &[f64]| 1.5 * x[0] * x[0] - 0.7 * x[0] * x[1] + 0.25 * x[1] * x[1] + 0.3 * x[1] - 1.0;
    let quad3 = |x: &[f64]| x[0] * x[0] + 0.5 * x[1] * x[1] + 2.0 * x[2] * x[2] + 0.4 * x[0] * x[2] - 0.5;
    for (name, rep) in [
        ("2D quadratic", liouville_probe_fn(quad2, &disk, 1.0 / 32.0)),
        ("3D quadratic", liouville_probe_fn(quad3, &ball, 1.0 / 8.0)),
    ] {
        match rep {
            Ok(r) => {
                pass &= r.deviation <= 1e-10;
                parts.push(format!("{name} deviation {:.1e} <= 1e-10", r.deviation));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: {e}"));
            }
        }
    }
    let ma = OperatorSpec::monge_ampere(2).unwrap();
    let square = DomainSpec::unit_box(2).unwrap();
    match solve(&ma, &square, 1.0 / 32.0, 1e-10, 50).and_then(|r| liouville_probe(&r.field)) {
        Ok(r) => {
            pass &= r.deviation > 1e-2;
            parts.push(format!("unit-square solution deviation {:.3e} > 1e-2", r.deviation));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("unit square: {e}"));
        }
    }
    report(8, "Liouville probe contrast", start.elapsed(), Some(60.0), Outcome { pass, detail: parts.join("; ") })
}

fn main() {
    let (c1, c6) = criterion_1_and_6();
    let results = [
        c1,
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        c6,
        criterion_7(),
        criterion_8(),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
