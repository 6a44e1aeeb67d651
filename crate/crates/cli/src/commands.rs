//! One function per command. Each returns the artifacts to write and
//! whether every checked property held.

use std::path::PathBuf;

use hessian_core::audit::{audit_operator, AuditReport};
use hessian_core::conditions::{
    check_cns, check_condition_d, check_k_hessian_lower_bound, check_pma_partial_sums, field_condition_scan,
    ConditionId, ConditionReport,
};
use hessian_core::harness::{
    blowdown as run_blowdown, c0_check, refinement_study_with, subsolution_ordering, AnalyticSource, BlowdownReport,
    BlowdownSource, C0Check, EstimateOptions, OrderingCheck, RefinementRow,
};
use hessian_core::operators::OperatorKind;
use hessian_core::solver::{solve_with, SolveReport, SolveSummary};
use hessian_core::symfun::Spectrum;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{resolve, sweep_run_settings, Command, RunConfig, Settings, SourceName};
use crate::output::{report_json, Artifacts};
use crate::{CliError, Status};

/// Refinement ratio below which the estimate functional counts as stabilized.
pub const STABILIZATION_THRESHOLD: f64 = 0.1;
/// Blow-down defects allowed for the exact quadratic source.
pub const INVARIANCE_TOL: f64 = 1e-12;
pub const EQUIVARIANCE_TOL: f64 = 1e-10;

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub artifacts: Artifacts,
    pub summary: String,
}

fn finish<T: Serialize>(config: &RunConfig, result: &T, verified: bool, summary: String) -> Result<Outcome, CliError> {
    let mut artifacts = Artifacts::default();
    artifacts.add("report.json", report_json(config, result)?);
    Ok(Outcome { status: Status::from_verified(verified), artifacts, summary })
}

pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    match config.command {
        Command::Solve => solve(config),
        Command::Check => check(config),
        Command::Estimate => estimate(config),
        Command::Blowdown => blowdown(config),
        Command::Audit => audit(config),
        Command::Sweep => Err(CliError::Config("sweep runs through commands::sweep".into())),
    }
}

fn solve_configured(config: &RunConfig) -> Result<SolveReport, CliError> {
    Ok(solve_with(&config.operator, &config.domain, config.h, &config.solve)?)
}

#[derive(Debug, Serialize)]
pub struct SolveResult {
    pub solve: SolveSummary,
    pub c0: C0Check,
    pub ordering: OrderingCheck,
    pub verified: bool,
}

fn solve(config: &RunConfig) -> Result<Outcome, CliError> {
    let rep = solve_configured(config)?;
    let c0 = c0_check(&rep.field, &config.operator);
    let ordering = subsolution_ordering(&rep.field, &config.operator);
    let verified = rep.admissible && rep.residual_max <= config.solve.tol && c0.holds && ordering.holds;
    let summary = format!(
        "solve {}: residual {:.3e} after {} Newton steps, admissible {}, c0 {}, ordering {}",
        config.operator, rep.residual_max, rep.newton_iterations, rep.admissible, c0.holds, ordering.holds
    );
    let result = SolveResult { solve: rep.summary(), c0, ordering, verified };
    let mut out = finish(config, &result, verified, summary)?;
    out.artifacts.add("field.csv", rep.field.to_csv());
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct CheckResult {
    /// `field` for a scan of the solved field, `point` for `--lambda`.
    pub target: &'static str,
    pub solve: Option<SolveSummary>,
    pub reports: Vec<ConditionReport>,
    pub verified: bool,
}

fn check_point(config: &RunConfig, lambda: &[f64], which: ConditionId) -> Result<ConditionReport, CliError> {
    let op = &config.operator;
    let params = &config.condition_params;
    let lambda = Spectrum::new(lambda.to_vec())?;
    let need = |v: Option<f64>| v.ok_or_else(|| CliError::Config(format!("condition {which:?} is missing its parameters")));
    let report = match which {
        ConditionId::D => check_condition_d(op, &op.normalize(&lambda)?, need(params.d1)?, need(params.d2)?)?,
        ConditionId::Cns => check_cns(&op.cone, &lambda, need(params.r)?)?,
        ConditionId::KHessianLowerBound => {
            let OperatorKind::KHessian { k } = op.kind else {
                return Err(CliError::Config("the k-Hessian lower bound needs --op khessian".into()));
            };
            check_k_hessian_lower_bound(&lambda, k, need(params.a)?)?
        }
        ConditionId::PmaPartialSums => {
            let OperatorKind::PMongeAmpere { p } = op.kind else {
                return Err(CliError::Config("the partial-sum bound needs --op pma".into()));
            };
            check_pma_partial_sums(&lambda, p, need(params.a)?)?
        }
    };
    Ok(report)
}

fn check(config: &RunConfig) -> Result<Outcome, CliError> {
    let (target, solve, reports) = match &config.lambda {
        Some(lambda) => {
            let reports = config.conditions.iter().map(|&c| check_point(config, lambda, c)).collect::<Result<Vec<_>, _>>()?;
            ("point", None, reports)
        }
        None => {
            let rep = solve_configured(config)?;
            let reports = config
                .conditions
                .iter()
                .map(|&c| field_condition_scan(&config.operator, &rep.field, c, &config.condition_params))
                .collect::<Result<Vec<_>, _>>()?;
            ("field", Some(rep.summary()), reports)
        }
    };
    let verified = reports.iter().all(|r| r.satisfied);
    let summary = reports
        .iter()
        .map(|r| format!("{:?} {} (worst margin {:.3e})", r.condition, if r.satisfied { "holds" } else { "fails" }, r.worst_margin))
        .collect::<Vec<_>>()
        .join("; ");
    finish(config, &CheckResult { target, solve, reports, verified }, verified, format!("check: {summary}"))
}

#[derive(Debug, Serialize)]
pub struct EstimateResult {
    pub rows: Vec<RefinementRow>,
    pub last_ratio: Option<f64>,
    pub stabilization_threshold: f64,
    pub stabilized: bool,
    pub verified: bool,
}

fn estimate(config: &RunConfig) -> Result<Outcome, CliError> {
    let opts = EstimateOptions { alpha: config.alpha, beta: config.beta, corner_clip: config.corner_clip };
    let study = refinement_study_with(&config.operator, &config.domain, &config.h_list, &opts, &config.solve)?;
    let last_ratio = study.last_ratio();
    let stabilized = last_ratio.is_none_or(|r| r <= STABILIZATION_THRESHOLD);
    let verified = stabilized
        && study
            .rows
            .iter()
            .all(|r| r.estimate.functional_sup.is_finite() && r.c0.holds && r.ordering.holds);
    let sups: Vec<String> = study.rows.iter().map(|r| format!("{:.6}", r.estimate.functional_sup)).collect();
    let summary = format!("estimate: sups [{}], last ratio {last_ratio:?}, stabilized {stabilized}", sups.join(", "));
    let table = study.to_csv();
    let result = EstimateResult {
        rows: study.rows,
        last_ratio,
        stabilization_threshold: STABILIZATION_THRESHOLD,
        stabilized,
        verified,
    };
    let mut out = finish(config, &result, verified, summary)?;
    out.artifacts.add("table.csv", table);
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct BlowdownResult {
    pub report: BlowdownReport,
    pub diameters_ok: bool,
    pub inner_subset: bool,
    /// Only checked for the exact quadratic source.
    pub invariance_ok: Option<bool>,
    pub equivariance_ok: Option<bool>,
    pub verified: bool,
}

fn blowdown(config: &RunConfig) -> Result<Outcome, CliError> {
    let b = &config.blowdown;
    let source = match b.source {
        SourceName::Analytic => {
            let mut src = AnalyticSource::radial(b.a, config.operator.n)?;
            src.growth_c = b.growth_c;
            BlowdownSource::Analytic(src)
        }
        SourceName::Solved => BlowdownSource::Field { field: solve_configured(config)?.field, growth_c: b.growth_c },
    };
    let report = run_blowdown(&source, &b.r_list, b.per_axis)?;
    let diameters_ok = report.all_diameters_ok();
    let inner_subset = report.rows.iter().all(|r| r.inner_subset);
    let (invariance_ok, equivariance_ok) = match b.source {
        SourceName::Analytic => (
            Some(report.max_invariance_defect() <= INVARIANCE_TOL),
            report.max_hessian_equivariance_defect().map(|d| d <= EQUIVARIANCE_TOL),
        ),
        SourceName::Solved => (None, None),
    };
    let verified = diameters_ok && inner_subset && invariance_ok != Some(false) && equivariance_ok != Some(false);
    let summary = format!(
        "blowdown: diameters ok {diameters_ok}, invariance defect {:.3e}, equivariance defect {:?}",
        report.max_invariance_defect(),
        report.max_hessian_equivariance_defect()
    );
    let table = report.to_csv();
    let result = BlowdownResult { report, diameters_ok, inner_subset, invariance_ok, equivariance_ok, verified };
    let mut out = finish(config, &result, verified, summary)?;
    out.artifacts.add("table.csv", table);
    Ok(out)
}

fn audit(config: &RunConfig) -> Result<Outcome, CliError> {
    let report: AuditReport = audit_operator(&config.operator, config.samples, config.seed)?;
    let summary = format!(
        "audit {}: {} suites, {} violations",
        config.operator,
        report.suites.len(),
        report.total_violations
    );
    let verified = report.passed();
    finish(config, &report, verified, summary)
}

#[derive(Debug, Serialize)]
pub struct SweepEntry {
    pub id: usize,
    pub dir: PathBuf,
    pub overlay: std::collections::BTreeMap<String, Value>,
    /// `ok`, `verification_failed` or `error`.
    pub status: &'static str,
    pub exit_code: i32,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SweepResult {
    pub runs: Vec<SweepEntry>,
    pub verified: bool,
}

/// Every run is resolved before any computation starts; runs then execute
/// on a pool of `config.workers` threads. Run `i` writes to `run-{i:04}/`.
pub fn sweep(config: &RunConfig, base: &Settings) -> Result<Outcome, CliError> {
    let sweep = config.sweep.as_ref().ok_or_else(|| CliError::Config("missing sweep axes".into()))?;
    let runs: Vec<(PathBuf, RunConfig)> = sweep
        .runs
        .iter()
        .enumerate()
        .map(|(i, overlay)| {
            let dir = PathBuf::from(format!("run-{i:04}"));
            let settings = sweep_run_settings(base, overlay, sweep.command, config.out.join(&dir))?;
            let run = resolve(sweep.command, &settings).map_err(|e| CliError::Config(format!("sweep run {i}: {e}")))?;
            Ok((dir, run))
        })
        .collect::<Result<_, CliError>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<Outcome, CliError>> = pool.install(|| runs.par_iter().map(|(_, run)| execute(run)).collect());

    let mut artifacts = Artifacts::default();
    let mut entries = Vec::with_capacity(runs.len());
    let (mut failed, mut errored) = (0, 0);
    for (id, ((dir, _), res)) in runs.iter().zip(results).enumerate() {
        let overlay = sweep.runs[id].clone();
        let entry = match res {
            Ok(outcome) => {
                artifacts.nest(dir, outcome.artifacts);
                let status = match outcome.status {
                    Status::Ok => "ok",
                    Status::VerificationFailed => {
                        failed += 1;
                        "verification_failed"
                    }
                };
                SweepEntry { id, dir: dir.clone(), overlay, status, exit_code: outcome.status.exit_code(), error: None }
            }
            Err(e) => {
                errored += 1;
                SweepEntry { id, dir: dir.clone(), overlay, status: "error", exit_code: 1, error: Some(e.to_string()) }
            }
        };
        entries.push(entry);
    }
    let verified = failed == 0 && errored == 0;
    let summary = format!("sweep: {} runs, {failed} verification failures, {errored} errors", entries.len());
    let index = report_json(config, &SweepResult { runs: entries, verified })?;
    artifacts.add("index.json", index);
    if errored > 0 {
        // Commit what finished, then report the operational failure.
        artifacts.commit(&config.out)?;
        return Err(CliError::Config(format!("{summary}; see {}", config.out.join("index.json").display())));
    }
    Ok(Outcome { status: Status::from_verified(verified), artifacts, summary })
}
