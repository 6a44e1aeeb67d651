//! Pointwise and field-level checkers for condition D, condition CNS and the
//! two sufficient hypotheses for CNS (the k-Hessian lower bound and the
//! p-Monge-Ampère partial-sum bound).
//!
//! Margins are signed so that a negative value always means a violation.
//! For condition D and the two lower-bound hypotheses the comparison is
//! non-strict and a margin of exactly zero is satisfied. Condition CNS is
//! an open-cone membership test, so there a zero margin is a violation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{smallest_sum, ConeKind, ConeSpec};
use crate::error::{Error, Result};
use crate::linalg::eigen_sym;
use crate::operators::{OperatorKind, OperatorSpec};
use crate::solver::GridField;
use crate::symfun::{sigma_all_slice, Spectrum};

/// `|f(λ) − 1|` above which condition D refuses to run.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Relative inflation of `A` when a strict `R > A` is needed.
pub const R_INFLATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    D,
    Cns,
    KHessianLowerBound,
    PmaPartialSums,
}

impl std::str::FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "d" => Ok(Self::D),
            "cns" => Ok(Self::Cns),
            "khessian" | "k_hessian" | "k_hessian_lower_bound" => Ok(Self::KHessianLowerBound),
            "pma" | "pma_partial_sums" => Ok(Self::PmaPartialSums),
            other => Err(Error::InvalidArgument(format!("unknown condition '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionParams {
    #[serde(rename = "D1", default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
    #[serde(rename = "D2", default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

impl ConditionParams {
    pub fn d(d1: f64, d2: f64) -> Self {
        Self { d1: Some(d1), d2: Some(d2), ..Self::default() }
    }

    pub fn cns(r: f64) -> Self {
        Self { r: Some(r), ..Self::default() }
    }

    pub fn lower_bound(a: f64) -> Self {
        Self { a: Some(a), ..Self::default() }
    }

    fn require(value: Option<f64>, name: &'static str) -> Result<f64> {
        match value {
            Some(v) if v.is_finite() => Ok(v),
            Some(v) => Err(Error::NonPositiveParameter { name, value: v }),
            None => Err(Error::InvalidArgument(format!("parameter {name} is required"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: ConditionId,
    pub satisfied: bool,
    /// Smallest signed margin; `+∞` (serialized as `null`) when vacuous.
    #[serde(with = "inf_as_null")]
    pub worst_margin: f64,
    /// Entry index for pointwise checks, node index for field scans.
    pub worst_index: Option<usize>,
    pub worst_position: Option<Vec<f64>>,
    pub params: ConditionParams,
    /// Whether the implied cone membership was observed (lower-bound checks).
    pub conclusion_holds: Option<bool>,
    /// Whether the proof's intermediate step was observed (lower-bound checks).
    pub intermediate_holds: Option<bool>,
    pub points_checked: usize,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl ConditionReport {
    fn point(condition: ConditionId, params: ConditionParams, margin: f64, index: Option<usize>, strict: bool) -> Self {
        Self {
            condition,
            satisfied: if strict { margin > 0.0 } else { margin >= 0.0 },
            worst_margin: margin,
            worst_index: index,
            worst_position: None,
            params,
            conclusion_holds: None,
            intermediate_holds: None,
            points_checked: 1,
        }
    }
}

fn check_len(n: usize, lambda: &Spectrum) -> Result<()> {
    if lambda.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: lambda.dim() });
    }
    Ok(())
}

fn require_member(cone: &ConeSpec, lambda: &Spectrum) -> Result<()> {
    check_len(cone.n, lambda)?;
    if cone.contains(lambda, 0.0)? {
        Ok(())
    } else {
        Err(Error::NotAdmissible { cone: cone.to_string(), values: lambda.to_vec() })
    }
}

/// Condition D: every `λ_i > D1` has `f_i(λ)·λ_i ≤ D2`. Requires `f(λ) = 1`.
pub fn check_condition_d(op: &OperatorSpec, lambda: &Spectrum, d1: f64, d2: f64) -> Result<ConditionReport> {
    let params = ConditionParams::d(d1, d2);
    ConditionParams::require(Some(d1), "D1")?;
    ConditionParams::require(Some(d2), "D2")?;
    check_len(op.n, lambda)?;
    let (f, grad) = op.value_and_grad_slice(lambda)?;
    if (f - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { value: f });
    }
    let mut margin = f64::INFINITY;
    let mut index = None;
    for (i, (&l, &g)) in lambda.iter().zip(&grad).enumerate() {
        if l > d1 && d2 - g * l < margin {
            margin = d2 - g * l;
            index = Some(i);
        }
    }
    Ok(ConditionReport::point(ConditionId::D, params, margin, index, false))
}

/// Condition CNS at one point: replacing any single entry by `R` stays in the cone.
pub fn check_cns(cone: &ConeSpec, lambda: &Spectrum, r: f64) -> Result<ConditionReport> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::NonPositiveParameter { name: "R", value: r });
    }
    require_member(cone, lambda)?;
    let (margin, index) = cns_margin(cone, lambda, r);
    Ok(ConditionReport::point(ConditionId::Cns, ConditionParams::cns(r), margin, Some(index), true))
}

fn cns_margin(cone: &ConeSpec, lambda: &[f64], r: f64) -> (f64, usize) {
    let mut work = lambda.to_vec();
    let mut worst = (f64::INFINITY, 0);
    for i in 0..lambda.len() {
        work[i] = r;
        let m = cone.margin_unchecked(&work);
        if m < worst.0 {
            worst = (m, i);
        }
        work[i] = lambda[i];
    }
    worst
}

/// `R = A(1 + ε) + ε`, strictly above `A`.
pub fn inflated_r(a: f64) -> f64 {
    a * (1.0 + R_INFLATION) + R_INFLATION
}

fn check_lower_bound_param(a: f64) -> Result<()> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::NonPositiveParameter { name: "A", value: a });
    }
    Ok(())
}

/// Hypothesis `σ_{k+1}(λ) ≥ −A·σ_k(λ)` for `λ ∈ Γ_k`.
///
/// Also records whether `(λ', R)` lies in `Γ_k` (conclusion) and in `Γ_{k−1}`
/// (intermediate), where the largest entry of `λ` is replaced by
/// [`inflated_r`]`(A)`.
pub fn check_k_hessian_lower_bound(lambda: &Spectrum, k: usize, a: f64) -> Result<ConditionReport> {
    check_lower_bound_param(a)?;
    let n = lambda.dim();
    let cone = ConeSpec::gamma_k(k, n)?;
    require_member(&cone, lambda)?;
    let s = sigma_all_slice(lambda);
    let next = if k < n { s[k + 1] } else { 0.0 };
    let margin = next + a * s[k];
    let mut report = ConditionReport::point(ConditionId::KHessianLowerBound, ConditionParams::lower_bound(a), margin, None, false);

    let mut replaced = lambda.sorted_descending().into_vec();
    replaced[0] = inflated_r(a);
    report.conclusion_holds = Some(cone.contains_slice(&replaced, 0.0));
    report.intermediate_holds = Some(if k >= 2 {
        ConeSpec::gamma_k(k - 1, n)?.contains_slice(&replaced, 0.0)
    } else {
        true
    });
    Ok(report)
}

/// Hypothesis: every `(p−1)`-sum of `λ ∈ Γ̂_p` is at least `−A`.
///
/// With `R` = [`inflated_r`]`(A)` the intermediate step is that `λ + R·1`
/// lies in `Γ̂_{p−1}` and the conclusion is condition CNS for `Γ̂_p` with `R`.
pub fn check_pma_partial_sums(lambda: &Spectrum, p: usize, a: f64) -> Result<ConditionReport> {
    check_lower_bound_param(a)?;
    let n = lambda.dim();
    let cone = ConeSpec::gamma_hat_p(p, n)?;
    if p < 2 {
        return Err(Error::DegreeOutOfRange { degree: p, min: 2, max: n });
    }
    require_member(&cone, lambda)?;
    let margin = smallest_sum(lambda, p - 1) + a;
    let mut report = ConditionReport::point(ConditionId::PmaPartialSums, ConditionParams::lower_bound(a), margin, None, false);
    let r = inflated_r(a);
    let shifted: Vec<f64> = lambda.iter().map(|l| l + r).collect();
    report.intermediate_holds = Some(ConeSpec::gamma_hat_p(p - 1, n)?.contains_slice(&shifted, 0.0));
    report.conclusion_holds = Some(cns_margin(&cone, lambda, r).0 > 0.0);
    Ok(report)
}

/// Applies one pointwise checker to the discrete Hessian spectrum at every
/// interior node. Condition D normalizes each spectrum to `f = 1` first.
///
/// The k-Hessian and p-Monge-Ampère checks take `k` or `p` from the
/// operator, which must be of the matching family.
pub fn field_condition_scan(
    op: &OperatorSpec,
    field: &GridField,
    which: ConditionId,
    params: &ConditionParams,
) -> Result<ConditionReport> {
    if op.n != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), found: op.n });
    }
    match (which, op.kind) {
        (ConditionId::KHessianLowerBound, OperatorKind::KHessian { .. }) => {}
        (ConditionId::PmaPartialSums, OperatorKind::PMongeAmpere { .. }) => {}
        (ConditionId::KHessianLowerBound | ConditionId::PmaPartialSums, _) => {
            return Err(Error::InvalidArgument(format!("condition {which:?} does not apply to {op}")));
        }
        _ => {}
    }
    let grid = field.grid();
    let nodes = grid.interior_nodes();
    let point = |slot: usize| -> Result<ConditionReport> {
        let lambda = eigen_sym(&field.hessian_slot(slot)).spectrum()?;
        match which {
            ConditionId::D => {
                let normalized = op.normalize(&lambda)?;
                let d1 = ConditionParams::require(params.d1, "D1")?;
                let d2 = ConditionParams::require(params.d2, "D2")?;
                check_condition_d(op, &normalized, d1, d2)
            }
            ConditionId::Cns => check_cns(&op.cone, &lambda, ConditionParams::require(params.r, "R")?),
            ConditionId::KHessianLowerBound => {
                let OperatorKind::KHessian { k } = op.kind else { unreachable!() };
                check_k_hessian_lower_bound(&lambda, k, ConditionParams::require(params.a, "A")?)
            }
            ConditionId::PmaPartialSums => {
                let ConeKind::GammaHatP(p) = op.cone.kind else { unreachable!() };
                check_pma_partial_sums(&lambda, p, ConditionParams::require(params.a, "A")?)
            }
        }
    };
    let results: Vec<Result<ConditionReport>> = (0..nodes.len()).into_par_iter().map(point).collect();

    let strict = which == ConditionId::Cns;
    let mut worst = f64::INFINITY;
    let mut worst_node = None;
    let mut satisfied = true;
    let mut conclusion: Option<bool> = None;
    let mut intermediate: Option<bool> = None;
    for (slot, res) in results.into_iter().enumerate() {
        let idx = nodes[slot];
        let rep = res.map_err(|e| e.at_node(idx, grid.position(idx)))?;
        satisfied &= rep.satisfied;
        if rep.worst_margin < worst || (worst_node.is_none() && !rep.satisfied) {
            worst = rep.worst_margin;
            worst_node = Some(idx);
        }
        if let Some(c) = rep.conclusion_holds {
            conclusion = Some(conclusion.unwrap_or(true) && c);
        }
        if let Some(c) = rep.intermediate_holds {
            intermediate = Some(intermediate.unwrap_or(true) && c);
        }
    }
    debug_assert!(satisfied == if strict { worst > 0.0 } else { worst >= 0.0 });
    Ok(ConditionReport {
        condition: which,
        satisfied,
        worst_margin: worst,
        worst_index: worst_node,
        worst_position: worst_node.map(|i| grid.position(i)),
        params: *params,
        conclusion_holds: conclusion,
        intermediate_holds: intermediate,
        points_checked: nodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{DomainSpec, Grid};

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::from_slice(v).unwrap()
    }

    #[test]
    fn condition_d_positive_spectrum_unit_bound() {
        let ma = OperatorSpec::monge_ampere(3).unwrap();
        let lambda = ma.normalize(&spec(&[0.5, 2.0, 7.0])).unwrap();
        let rep = check_condition_d(&ma, &lambda, 0.0, 1.0).unwrap();
        assert!(rep.satisfied);
        assert!((rep.worst_margin - (1.0 - 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn condition_d_vacuous_and_unnormalized() {
        let k2 = OperatorSpec::k_hessian(2, 3).unwrap();
        let lambda = k2.normalize(&spec(&[1.0, 1.0, 1.0])).unwrap();
        let rep = check_condition_d(&k2, &lambda, 10.0, 0.0).unwrap();
        assert!(rep.satisfied);
        assert_eq!(rep.worst_margin, f64::INFINITY);
        assert_eq!(rep.worst_index, None);
        assert!(matches!(
            check_condition_d(&k2, &spec(&[1.0, 1.0, 1.0]), 0.0, 1.0),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn cns_examples() {
        let g2 = ConeSpec::gamma_k(2, 3).unwrap();
        let rep = check_cns(&g2, &spec(&[5.0, 5.0, -1.0]), 2.0).unwrap();
        assert!(rep.satisfied);
        // σ_2(5, 5, 2) = 45, σ_2(2, 5, −1) = 3, σ_2(5, 2, −1) = 3.
        assert_eq!(rep.worst_margin, 3.0);

        let (t, c, r) = (100.0, 0.4, 1.0);
        let lambda = spec(&[t, t, -c * t]);
        assert!(g2.contains(&lambda, 0.0).unwrap());
        let rep = check_cns(&g2, &lambda, r).unwrap();
        assert!(!rep.satisfied);
        assert!((rep.worst_margin - (r * t * (1.0 - c) - c * t * t)).abs() < 1e-9);

        let rep = check_cns(&g2, &spec(&[0.0, 3.0, 1.0]), 0.5).unwrap();
        assert!(rep.satisfied);
        assert!(check_cns(&g2, &spec(&[-1.0, -1.0, 1.0]), 1.0).is_err());
    }

    #[test]
    fn cns_point_passes_condition_d_with_doubled_r() {
        let g2 = ConeSpec::gamma_k(2, 3).unwrap();
        let k2 = OperatorSpec::k_hessian(2, 3).unwrap();
        let raw = spec(&[5.0, 5.0, -1.0]);
        let lambda = k2.normalize(&raw).unwrap();
        let r = 2.0;
        assert!(check_cns(&g2, &lambda, r).unwrap().satisfied);
        assert!(check_condition_d(&k2, &lambda, 2.0 * r, 2.0).unwrap().satisfied);
    }

    #[test]
    fn k_hessian_lower_bound_examples() {
        let rep = check_k_hessian_lower_bound(&spec(&[1.0, 1.0, 1.0]), 2, 0.0).unwrap();
        assert!(rep.satisfied);
        assert_eq!(rep.worst_margin, 1.0);
        assert_eq!(rep.conclusion_holds, Some(true));

        // σ_3 = −50 and σ_2 = 5, so σ_3 = −10·σ_2 exactly.
        let rep = check_k_hessian_lower_bound(&spec(&[5.0, 5.0, -2.0]), 2, 10.0).unwrap();
        assert!(rep.satisfied);
        assert_eq!(rep.worst_margin, 0.0);
        assert_eq!(rep.conclusion_holds, Some(true));
        assert_eq!(rep.intermediate_holds, Some(true));

        let rep = check_k_hessian_lower_bound(&spec(&[5.0, 5.0, -2.0]), 2, 9.0).unwrap();
        assert!(!rep.satisfied);
        assert!(rep.worst_margin < 0.0);
        assert!(check_k_hessian_lower_bound(&spec(&[1.0, -3.0, 1.0]), 2, 1.0).is_err());
    }

    #[test]
    fn pma_partial_sum_examples() {
        let rep = check_pma_partial_sums(&spec(&[-1.0, 2.0, 3.0]), 2, 1.0).unwrap();
        assert!(rep.satisfied);
        assert_eq!(rep.worst_margin, 0.0);
        assert_eq!(rep.conclusion_holds, Some(true));
        assert_eq!(rep.intermediate_holds, Some(true));

        let rep = check_pma_partial_sums(&spec(&[0.0, 2.0, 3.0]), 2, 0.0).unwrap();
        assert!(rep.satisfied);

        let rep = check_pma_partial_sums(&spec(&[-2.0, -2.0, 5.0, 5.0]), 3, 3.0).unwrap();
        assert!(!rep.satisfied);
        assert_eq!(rep.worst_margin, -1.0);
        assert!(check_pma_partial_sums(&spec(&[-3.0, 1.0, 1.0]), 2, 1.0).is_err());
    }

    #[test]
    fn report_round_trips_through_json_with_infinite_margin() {
        let k2 = OperatorSpec::k_hessian(2, 3).unwrap();
        let lambda = k2.normalize(&spec(&[1.0, 1.0, 1.0])).unwrap();
        let rep = check_condition_d(&k2, &lambda, 10.0, 0.0).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"worst_margin\":null"));
        let back: ConditionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn field_scan_on_radial_quadratic() {
        let ma = OperatorSpec::monge_ampere(2).unwrap();
        let disk = DomainSpec::unit_ball(2).unwrap();
        let grid = Grid::new(&disk, 1.0 / 16.0).unwrap();
        let u = GridField::from_fn(&grid, |x| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0));
        let d = field_condition_scan(&ma, &u, ConditionId::D, &ConditionParams::d(0.0, 1.0 + 1e-8)).unwrap();
        assert!(d.satisfied);
        assert_eq!(d.points_checked, grid.interior_nodes().len());
        let cns = field_condition_scan(&ma, &u, ConditionId::Cns, &ConditionParams::cns(2.0)).unwrap();
        assert!(cns.satisfied);
        assert!(field_condition_scan(&ma, &u, ConditionId::PmaPartialSums, &ConditionParams::lower_bound(1.0)).is_err());
    }

    #[test]
    fn field_scan_reports_first_offending_node() {
        let ma = OperatorSpec::monge_ampere(2).unwrap();
        let disk = DomainSpec::unit_ball(2).unwrap();
        let grid = Grid::new(&disk, 1.0 / 16.0).unwrap();
        let u = GridField::from_fn(&grid, |x| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0) - 0.3 * (3.0 * x[0]).sin());
        match field_condition_scan(&ma, &u, ConditionId::D, &ConditionParams::d(0.0, 1.0)) {
            Err(Error::AtNode { node, source, .. }) => {
                assert!(matches!(*source, Error::NotAdmissible { .. }));
                let first_bad = grid
                    .interior_nodes()
                    .iter()
                    .position(|&i| {
                        let l = eigen_sym(&u.hessian_fd(i).unwrap()).values;
                        l.iter().any(|&v| v <= 0.0)
                    })
                    .unwrap();
                assert_eq!(node, grid.interior_nodes()[first_bad]);
            }
            other => panic!("expected node error, got {other:?}"),
        }
    }
}
