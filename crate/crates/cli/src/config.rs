//! Settings from a JSON file and flags, and their resolution into a fully
//! specified run.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hessian_core::conditions::{ConditionId, ConditionParams};
use hessian_core::harness::{default_exponents_for, DEFAULT_CORNER_CLIP};
use hessian_core::operators::OperatorSpec;
use hessian_core::solver::{DomainSpec, Grid, SolveOptions};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Check,
    Estimate,
    Blowdown,
    Sweep,
    Audit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpName {
    Ma,
    Khessian,
    Quotient,
    Pma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainName {
    Ball,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceName {
    /// `u = a|x|²/2`.
    Analytic,
    /// A solve of the configured problem.
    Solved,
}

/// Every setting, all optional. The same struct is the JSON config file
/// schema, the flag set and the overlay type of a sweep axis.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Only meaningful inside a config file; must match the subcommand.
    #[arg(skip)]
    pub command: Option<Command>,

    #[arg(long, value_enum)]
    pub op: Option<OpName>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long, value_enum)]
    pub domain: Option<DomainName>,
    /// Ball radius (ball centered at the origin).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Box side length (box centered at the origin).
    #[arg(long)]
    pub side: Option<f64>,

    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub h_list: Option<Vec<f64>>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,

    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Distance from box corners, in units of h, inside which estimate nodes are dropped.
    #[arg(long)]
    pub corner_clip: Option<f64>,

    #[arg(long = "D1")]
    #[serde(rename = "D1")]
    pub d1: Option<f64>,
    #[arg(long = "D2")]
    #[serde(rename = "D2")]
    pub d2: Option<f64>,
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a_bound: Option<f64>,
    /// Conditions to check: d, cns, khessian, pma.
    #[arg(long, value_delimiter = ',')]
    pub condition: Option<Vec<ConditionId>>,
    /// Check one eigenvalue vector instead of a solved field.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,

    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Sweep concurrency; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long = "R-list", value_delimiter = ',')]
    #[serde(rename = "R_list")]
    pub r_list: Option<Vec<f64>>,
    /// Curvature of the analytic blow-down source.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub growth_c: Option<f64>,
    /// Odd node count per axis of the blow-down lattice.
    #[arg(long)]
    pub per_axis: Option<usize>,
    #[arg(long, value_enum)]
    pub source: Option<SourceName>,

    /// Command each sweep run executes.
    #[arg(long, value_enum)]
    pub sweep_command: Option<Command>,
    /// Sweep axes, as a map from setting name to the list of values.
    #[arg(skip)]
    pub sweep: Option<BTreeMap<String, Vec<Value>>>,
    /// Sweep axis `KEY=V1,V2,...`; repeatable.
    #[arg(long = "axis", value_name = "KEY=VALUES")]
    #[serde(skip)]
    pub axis: Vec<String>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl Settings {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: Settings) -> Self {
        overlay_fields!(
            self, top, command, op, k, l, p, n, domain, radius, side, h, h_list, tol, max_iter, alpha, beta,
            corner_clip, d1, d2, r, a_bound, condition, lambda, seed, samples, workers, out, r_list, a, growth_c,
            per_axis, source, sweep_command, sweep
        );
        if !top.axis.is_empty() {
            self.axis = top.axis;
        }
        self
    }

    /// Sweep axes from the config file and `--axis` flags; flags win per key.
    fn sweep_axes(&self) -> Result<BTreeMap<String, Vec<Value>>, CliError> {
        let mut axes = self.sweep.clone().unwrap_or_default();
        for spec in &self.axis {
            let (key, values) = spec
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("axis '{spec}' is not KEY=V1,V2,...")))?;
            let values = values
                .split(',')
                .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
                .collect();
            axes.insert(key.replace('-', "_"), values);
        }
        Ok(axes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowdownConfig {
    pub source: SourceName,
    #[serde(rename = "R_list")]
    pub r_list: Vec<f64>,
    pub a: f64,
    pub growth_c: f64,
    pub per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub command: Command,
    pub axes: BTreeMap<String, Vec<Value>>,
    /// One overlay per run, in cross-product order (last axis fastest).
    pub runs: Vec<BTreeMap<String, Value>>,
}

/// Fully resolved run; embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub operator: OperatorSpec,
    pub domain: DomainSpec,
    pub h: f64,
    pub h_list: Vec<f64>,
    pub solve: SolveOptions,
    pub alpha: f64,
    pub beta: f64,
    pub corner_clip: Option<f64>,
    pub condition_params: ConditionParams,
    pub conditions: Vec<ConditionId>,
    pub lambda: Option<Vec<f64>>,
    pub seed: u64,
    pub samples: usize,
    pub workers: usize,
    pub out: PathBuf,
    pub blowdown: BlowdownConfig,
    pub sweep: Option<SweepConfig>,
}

fn cfg<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

fn operator(s: &Settings) -> Result<OperatorSpec, CliError> {
    let op = s.op.unwrap_or(OpName::Ma);
    let n = s.n.unwrap_or(2);
    let unused = |name: &str, v: Option<usize>| match v {
        Some(_) => cfg(format!("--{name} does not apply to --op {op:?}").to_lowercase()),
        None => Ok(()),
    };
    let need = |name: &str, v: Option<usize>| v.ok_or_else(|| CliError::Config(format!("--op {op:?} needs --{name}").to_lowercase()));
    let spec = match op {
        OpName::Ma => {
            unused("k", s.k)?;
            unused("l", s.l)?;
            unused("p", s.p)?;
            OperatorSpec::monge_ampere(n)
        }
        OpName::Khessian => {
            unused("l", s.l)?;
            unused("p", s.p)?;
            OperatorSpec::k_hessian(need("k", s.k)?, n)
        }
        OpName::Quotient => {
            unused("p", s.p)?;
            OperatorSpec::hessian_quotient(need("k", s.k)?, need("l", s.l)?, n)
        }
        OpName::Pma => {
            unused("k", s.k)?;
            unused("l", s.l)?;
            OperatorSpec::p_monge_ampere(need("p", s.p)?, n)
        }
    };
    Ok(spec?)
}

fn domain(s: &Settings, n: usize) -> Result<DomainSpec, CliError> {
    let shape = s.domain.unwrap_or(DomainName::Ball);
    match shape {
        DomainName::Ball => {
            if s.side.is_some() {
                return cfg("--side applies to box domains only");
            }
            Ok(DomainSpec::ball(vec![0.0; n], s.radius.unwrap_or(1.0))?)
        }
        DomainName::Box => {
            if s.radius.is_some() {
                return cfg("--radius applies to ball domains only");
            }
            let half = 0.5 * s.side.unwrap_or(1.0);
            Ok(DomainSpec::cuboid(vec![-half; n], vec![half; n])?)
        }
    }
}

/// Conditions named explicitly, or else every condition whose parameters are given.
fn conditions(s: &Settings) -> Vec<ConditionId> {
    if let Some(list) = &s.condition {
        return list.clone();
    }
    let mut out = Vec::new();
    if s.d1.is_some() && s.d2.is_some() {
        out.push(ConditionId::D);
    }
    if s.r.is_some() {
        out.push(ConditionId::Cns);
    }
    if s.a_bound.is_some() {
        match s.op.unwrap_or(OpName::Ma) {
            OpName::Khessian => out.push(ConditionId::KHessianLowerBound),
            OpName::Pma => out.push(ConditionId::PmaPartialSums),
            _ => {}
        }
    }
    out
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        cfg(format!("{name} must be positive and finite, got {v}"))
    }
}

/// Cross product of the axes in key order, last key fastest.
fn cross_product(axes: &BTreeMap<String, Vec<Value>>) -> Vec<BTreeMap<String, Value>> {
    let mut runs = vec![BTreeMap::new()];
    for (key, values) in axes {
        runs = runs
            .into_iter()
            .flat_map(|run| {
                values.iter().map(move |v| {
                    let mut r = run.clone();
                    r.insert(key.clone(), v.clone());
                    r
                })
            })
            .collect();
    }
    runs
}

/// Settings of sweep run `overlay`, ready for [`resolve`].
pub fn sweep_run_settings(base: &Settings, overlay: &BTreeMap<String, Value>, command: Command, dir: PathBuf) -> Result<Settings, CliError> {
    let map: serde_json::Map<String, Value> = overlay.clone().into_iter().collect();
    let top: Settings = serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Config(format!("sweep axis: {e}")))?;
    let mut s = base.clone().overlay(top);
    s.command = Some(command);
    s.out = Some(dir);
    s.sweep = None;
    s.sweep_command = None;
    s.axis.clear();
    Ok(s)
}

/// Validates everything that can be validated without computing.
pub fn resolve(command: Command, s: &Settings) -> Result<RunConfig, CliError> {
    if let Some(c) = s.command {
        if c != command {
            return cfg(format!("config file is for '{c:?}' but the command is '{command:?}'").to_lowercase());
        }
    }
    let op = operator(s)?;
    let n = op.n;
    let domain = domain(s, n)?;

    let h = s.h.unwrap_or(1.0 / 32.0);
    let h_list = s.h_list.clone().unwrap_or_else(|| vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]);
    let solve = SolveOptions {
        tol: s.tol.unwrap_or(1e-10),
        max_iter: s.max_iter.unwrap_or(50),
        ..SolveOptions::default()
    };
    check_positive("tol", solve.tol)?;
    let (alpha_default, beta_default) = default_exponents_for(&op);
    let alpha = s.alpha.unwrap_or(alpha_default);
    let beta = s.beta.unwrap_or(beta_default);
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    let corner_clip = match (s.corner_clip, domain.is_ball()) {
        (Some(c), _) => Some(c),
        (None, true) => None,
        (None, false) => Some(DEFAULT_CORNER_CLIP),
    };

    let condition_params = ConditionParams { d1: s.d1, d2: s.d2, r: s.r, a: s.a_bound };
    let conditions = conditions(s);

    let source = s.source.unwrap_or(SourceName::Analytic);
    let a = s.a.unwrap_or(1.0);
    check_positive("a", a)?;
    let growth_c = match (source, s.growth_c) {
        (_, Some(c)) => c,
        (SourceName::Analytic, None) => 2.0 / a,
        (SourceName::Solved, None) => return cfg("a solved blow-down source needs --growth-c"),
    };
    check_positive("growth_c", growth_c)?;
    let blowdown = BlowdownConfig {
        source,
        r_list: s.r_list.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]),
        a,
        growth_c,
        per_axis: s.per_axis.unwrap_or(21),
    };

    let needs_grid = |h: f64| -> Result<(), CliError> {
        Grid::new(&domain, h)?;
        Ok(())
    };
    match command {
        Command::Solve => needs_grid(h)?,
        Command::Check => {
            if conditions.is_empty() {
                return cfg("no condition selected: pass --condition or its parameters (--D1/--D2, --R, --A)");
            }
            for c in &conditions {
                let missing = match c {
                    ConditionId::D => condition_params.d1.is_none() || condition_params.d2.is_none(),
                    ConditionId::Cns => condition_params.r.is_none(),
                    _ => condition_params.a.is_none(),
                };
                if missing {
                    return cfg(format!("condition {c:?} is missing its parameters"));
                }
            }
            match &s.lambda {
                Some(l) if l.len() != n => return cfg(format!("--lambda has {} entries, expected {n}", l.len())),
                Some(_) => {}
                None => needs_grid(h)?,
            }
        }
        Command::Estimate => {
            if h_list.is_empty() || h_list.windows(2).any(|w| !(w[1] < w[0])) {
                return cfg("--h-list must be non-empty and strictly decreasing");
            }
            for &h in &h_list {
                needs_grid(h)?;
            }
        }
        Command::Blowdown => {
            if blowdown.r_list.is_empty() || blowdown.r_list.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return cfg("--R-list must be non-empty and positive");
            }
            if blowdown.per_axis < 5 || blowdown.per_axis % 2 == 0 {
                return cfg("--per-axis must be odd and at least 5");
            }
            if !(2..=3).contains(&n) {
                return cfg("blow-down runs in dimension 2 or 3");
            }
            if source == SourceName::Solved {
                needs_grid(h)?;
            }
        }
        Command::Audit => {
            if s.samples == Some(0) {
                return cfg("--samples must be positive");
            }
        }
        Command::Sweep => {}
    }

    let sweep = if command == Command::Sweep {
        let sub = s.sweep_command.ok_or_else(|| CliError::Config("sweep needs --sweep-command".into()))?;
        if sub == Command::Sweep {
            return cfg("a sweep cannot run sweeps");
        }
        let axes = s.sweep_axes()?;
        if axes.is_empty() || axes.values().any(|v| v.is_empty()) {
            return cfg("sweep needs at least one non-empty axis");
        }
        Some(SweepConfig { command: sub, runs: cross_product(&axes), axes })
    } else {
        None
    };

    Ok(RunConfig {
        command,
        operator: op,
        domain,
        h,
        h_list,
        solve,
        alpha,
        beta,
        corner_clip,
        condition_params,
        conditions,
        lambda: s.lambda.clone(),
        seed: s.seed.unwrap_or(0),
        samples: s.samples.unwrap_or(10_000),
        workers: s.workers.unwrap_or(0),
        out: s.out.clone().unwrap_or_else(|| PathBuf::from("hessian-lab-out")),
        blowdown,
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings::from_json(r#"{"op": "khessian", "k": 2, "n": 3, "h": 0.1}"#).unwrap();
        let flags = Settings { h: Some(0.0625), ..Settings::default() };
        let s = file.overlay(flags);
        assert_eq!(s.h, Some(0.0625));
        assert_eq!(s.k, Some(2));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Settings::from_json(r#"{"opp": "ma"}"#).is_err());
    }

    #[test]
    fn parameter_consistency() {
        let bad = |s: Settings| resolve(Command::Solve, &s).is_err();
        assert!(bad(Settings { op: Some(OpName::Quotient), k: Some(2), l: Some(2), ..Settings::default() }));
        assert!(bad(Settings { op: Some(OpName::Pma), p: Some(3), n: Some(2), ..Settings::default() }));
        assert!(bad(Settings { op: Some(OpName::Ma), k: Some(2), ..Settings::default() }));
        assert!(bad(Settings { op: Some(OpName::Khessian), ..Settings::default() }));
        assert!(bad(Settings { h: Some(0.5), ..Settings::default() }));
        assert!(resolve(Command::Solve, &Settings::default()).is_ok());
    }

    #[test]
    fn sweep_cross_product_order() {
        let s = Settings {
            sweep_command: Some(Command::Solve),
            axis: vec!["n=2,3".into(), "domain=ball,box".into()],
            ..Settings::default()
        };
        let run = resolve(Command::Sweep, &s).unwrap();
        let runs = run.sweep.unwrap().runs;
        assert_eq!(runs.len(), 4);
        assert_eq!(runs[0]["domain"], Value::from("ball"));
        assert_eq!(runs[1]["domain"], Value::from("ball"));
        assert_eq!(runs[0]["n"], Value::from(2));
        assert_eq!(runs[1]["n"], Value::from(3));
    }

    #[test]
    fn check_infers_conditions_from_parameters() {
        let s = Settings { d1: Some(0.0), d2: Some(1.0), r: Some(2.0), ..Settings::default() };
        let run = resolve(Command::Check, &s).unwrap();
        assert_eq!(run.conditions, vec![ConditionId::D, ConditionId::Cns]);
        assert!(resolve(Command::Check, &Settings::default()).is_err());
    }
}
