use hessian_core::harness::{c0_check, max_error, observed_orders, subsolution_ordering};
use hessian_core::operators::OperatorSpec;
use hessian_core::solver::{solve, DomainSpec, GridField, SolveReport};
use hessian_core::Error;

fn radial(center: &[f64], radius: f64, a: f64) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x| {
        let r2: f64 = x.iter().zip(center).map(|(p, c)| (p - c).powi(2)).sum();
        0.5 * a * (r2 - radius * radius)
    }
}

fn check_solution(op: &OperatorSpec, rep: &SolveReport, tol: f64) {
    assert!(rep.residual_max <= tol);
    assert!(rep.admissible);
    assert!(rep.min_cone_margin >= 1e-10);
    assert!(rep.residual_history.windows(2).all(|w| w[1] < w[0]));
    let c0 = c0_check(&rep.field, op);
    assert!(c0.holds, "{c0:?}");
    assert!(subsolution_ordering(&rep.field, op).holds);
    assert!(rep.field.interior_values().iter().all(|&u| u < 0.0));
}

#[test]
fn disk_monge_ampere_matches_closed_form() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let disk = DomainSpec::unit_ball(2).unwrap();
    let rep = solve(&op, &disk, 1.0 / 32.0, 1e-10, 50).unwrap();
    check_solution(&op, &rep, 1e-10);
    assert!(max_error(&rep.field, radial(&[0.0, 0.0], 1.0, 1.0)) <= 1e-10);
}

#[test]
fn off_center_ball_uses_asymmetric_cuts() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let center = [0.3, -0.2];
    let ball = DomainSpec::ball(center.to_vec(), 0.8).unwrap();
    let rep = solve(&op, &ball, 0.8 / 24.0, 1e-10, 50).unwrap();
    check_solution(&op, &rep, 1e-10);
    assert!(max_error(&rep.field, radial(&center, 0.8, 1.0)) <= 1e-10);
}

#[test]
fn other_operators_on_balls() {
    // p = n: f is the trace, so u = (|x|² − 1)/4.
    let pma = OperatorSpec::p_monge_ampere(2, 2).unwrap();
    let disk = DomainSpec::unit_ball(2).unwrap();
    let rep = solve(&pma, &disk, 1.0 / 16.0, 1e-10, 50).unwrap();
    check_solution(&pma, &rep, 1e-10);
    assert!(max_error(&rep.field, radial(&[0.0, 0.0], 1.0, 0.5)) <= 1e-10);

    let ball = DomainSpec::unit_ball(3).unwrap();
    for op in [OperatorSpec::hessian_quotient(2, 1, 3).unwrap(), OperatorSpec::k_hessian(2, 3).unwrap()] {
        let rep = solve(&op, &ball, 1.0 / 8.0, 1e-10, 50).unwrap();
        check_solution(&op, &rep, 1e-10);
        // F(a·I) = a·f(1), so the radial quadratic has curvature 1/f(1).
        assert!(max_error(&rep.field, radial(&[0.0; 3], 1.0, 1.0 / op.f_one())) <= 1e-10);
    }
}

fn center_value(field: &GridField) -> f64 {
    field.interpolate(&vec![0.0; field.dim()]).unwrap()
}

fn max_symmetry_defect(field: &GridField) -> f64 {
    let grid = field.grid();
    let mut worst: f64 = 0.0;
    for &idx in grid.interior_nodes() {
        let x = grid.position(idx);
        let u = field.value(idx);
        for image in [[-x[0], x[1]], [x[0], -x[1]], [x[1], x[0]]] {
            worst = worst.max((u - field.interpolate(&image).unwrap()).abs());
        }
    }
    worst
}

#[test]
fn square_monge_ampere_converges_under_refinement() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let square = DomainSpec::unit_box(2).unwrap();
    let hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let mut centers = Vec::new();
    for &h in &hs {
        let rep = solve(&op, &square, h, 1e-10, 50).unwrap();
        check_solution(&op, &rep, 1e-10);
        assert!(max_symmetry_defect(&rep.field) <= 1e-8);
        centers.push(center_value(&rep.field));
    }
    let diffs = [(centers[0] - centers[1]).abs(), (centers[1] - centers[2]).abs()];
    let order = observed_orders(&hs[..2], &diffs)[0];
    println!("square center values {centers:?}, self-convergence order {order:.3}");
    assert!(diffs[0] > 0.0 && diffs[1] > 0.0);
    assert!(diffs[1] < diffs[0]);
}

#[test]
fn three_dimensional_box() {
    let op = OperatorSpec::k_hessian(2, 3).unwrap();
    let cube = DomainSpec::unit_box(3).unwrap();
    let rep = solve(&op, &cube, 1.0 / 16.0, 1e-10, 50).unwrap();
    check_solution(&op, &rep, 1e-10);
}

#[test]
fn solves_are_deterministic() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let square = DomainSpec::unit_box(2).unwrap();
    let a = solve(&op, &square, 1.0 / 32.0, 1e-10, 50).unwrap();
    let b = solve(&op, &square, 1.0 / 32.0, 1e-10, 50).unwrap();
    let bits = |r: &SolveReport| r.field.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.residual_history, b.residual_history);
}

#[test]
fn errors_are_distinct() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let square = DomainSpec::unit_box(2).unwrap();
    assert!(matches!(solve(&op, &square, 1.0 / 16.0, 1e-10, 1), Err(Error::MaxIterations { .. })));
    assert!(matches!(solve(&op, &square, 0.3, 1e-10, 50), Err(Error::InvalidDomain(_))));
    assert!(matches!(solve(&op, &square, -0.1, 1e-10, 50), Err(Error::NonPositiveParameter { name: "h", .. })));
    assert!(matches!(solve(&op, &square, 1.0 / 16.0, 0.0, 50), Err(Error::NonPositiveParameter { name: "tol", .. })));
    let cube = DomainSpec::unit_box(3).unwrap();
    assert!(matches!(solve(&op, &cube, 1.0 / 16.0, 1e-10, 50), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn field_csv_after_solve() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let disk = DomainSpec::unit_ball(2).unwrap();
    let rep = solve(&op, &disk, 1.0 / 16.0, 1e-10, 50).unwrap();
    let csv = rep.field.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,u"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
        assert!(cols[0].hypot(cols[1]) <= 1.0 + 1e-12);
        assert!(cols[2] <= 0.0);
        rows += 1;
    }
    assert!(rows > rep.field.grid().interior_nodes().len());
}
