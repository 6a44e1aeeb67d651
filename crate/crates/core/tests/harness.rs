use hessian_core::conditions::{field_condition_scan, ConditionId, ConditionParams};
use hessian_core::harness::{
    blowdown, default_exponents, liouville_probe, refinement_study, BlowdownSource, EstimateOptions,
};
use hessian_core::operators::OperatorSpec;
use hessian_core::solver::{solve, DomainSpec};
use hessian_core::Error;

#[test]
fn condition_scan_on_solved_disk() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let disk = DomainSpec::unit_ball(2).unwrap();
    let rep = solve(&op, &disk, 1.0 / 16.0, 1e-10, 50).unwrap();
    let interior = rep.field.grid().interior_nodes().len();

    let d = field_condition_scan(&op, &rep.field, ConditionId::D, &ConditionParams::d(0.0, 1.0 + 1e-8)).unwrap();
    assert_eq!(d.points_checked, interior);
    assert!(d.satisfied, "{d:?}");

    let cns = field_condition_scan(&op, &rep.field, ConditionId::Cns, &ConditionParams::cns(2.0)).unwrap();
    assert!(cns.satisfied);
    assert!(cns.worst_margin > 0.0);

    let missing = field_condition_scan(&op, &rep.field, ConditionId::Cns, &ConditionParams::default());
    assert!(missing.is_err());
    let wrong_family =
        field_condition_scan(&op, &rep.field, ConditionId::KHessianLowerBound, &ConditionParams::lower_bound(1.0));
    assert!(matches!(wrong_family, Err(Error::InvalidArgument(_))));
}

#[test]
fn blowdown_of_solved_large_ball() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let ball = DomainSpec::ball(vec![0.0, 0.0], 8.0).unwrap();
    let rep = solve(&op, &ball, 1.0 / 8.0, 1e-10, 50).unwrap();
    let source = BlowdownSource::Field { field: rep.field, growth_c: 2.0 };
    let report = blowdown(&source, &[1.0, 2.0, 3.0], 21).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.all_diameters_ok());
    assert!(report.max_invariance_defect() <= 1e-2);
    assert!(report.to_csv().lines().count() == 4);

    assert!(matches!(blowdown(&source, &[1.0, 100.0], 21), Err(Error::Blowdown(_))));
}

#[test]
fn square_refinement_with_corner_clipping() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let square = DomainSpec::unit_box(2).unwrap();
    let (alpha, beta) = default_exponents(2);
    let study = refinement_study(&op, &square, &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], alpha, beta).unwrap();
    for row in &study.rows {
        assert!(row.estimate.nodes_clipped > 0);
        assert!(row.c0.holds);
        assert!(row.ordering.holds);
    }
    assert!(study.last_ratio().unwrap() <= 0.1);
    assert_eq!(study.to_csv().lines().count(), 4);

    let unclipped = EstimateOptions { alpha, beta, corner_clip: None };
    let est = hessian_core::harness::estimate_functional_with(&study.fields[2], &unclipped).unwrap();
    assert_eq!(est.nodes_clipped, 0);
    assert!(est.nodes_used > study.rows[2].estimate.nodes_used);
}

#[test]
fn refinement_rejects_bad_lists() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let disk = DomainSpec::unit_ball(2).unwrap();
    assert!(matches!(refinement_study(&op, &disk, &[], 1.5, 10.0), Err(Error::InvalidArgument(_))));
    assert!(matches!(
        refinement_study(&op, &disk, &[1.0 / 32.0, 1.0 / 16.0], 1.5, 10.0),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn liouville_probe_on_solved_disk_is_quadratic() {
    let op = OperatorSpec::monge_ampere(2).unwrap();
    let disk = DomainSpec::unit_ball(2).unwrap();
    let rep = solve(&op, &disk, 1.0 / 16.0, 1e-10, 50).unwrap();
    let probe = liouville_probe(&rep.field).unwrap();
    assert!(probe.deviation <= 1e-8, "{probe:?}");
    assert!(probe.fit_rms <= 1e-10);
    assert!((probe.hessian.get(0, 0) - 1.0).abs() <= 1e-8);
    assert!(probe.hessian.get(0, 1).abs() <= 1e-8);
}
