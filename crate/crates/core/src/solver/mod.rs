//! Damped Newton solver for `F(D²u) = 1` in Ω, `u = 0` on ∂Ω.
//!
//! The iteration starts from the quadratic subsolution
//! `u̲ = (A/2)(|x − x_0|² − diam²(Ω))`, `A = 1/f(1)`, sampled at every node
//! including the boundary data, so the discrete equation holds exactly and
//! only the boundary condition is violated. Newton then acts on the full
//! system including the Dirichlet rows: each step drives the boundary data
//! to zero and the interior update comes from the linearization
//! `Σ F^{ij} ∂_ij`, solved with ILU(0)-preconditioned GMRES. The line search
//! backtracks on `max(max|F − 1|, max|u on ∂Ω|)` and rejects any step that
//! leaves the cone at some node.

pub mod domain;
pub mod grid;
pub mod sparse;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::OperatorSpec;

pub use domain::{DomainSpec, Shape};
pub use grid::{Grid, GridField, NodeKind, ScalarField};
use grid::pair_lines;
use sparse::{gmres, CsrMatrix, GmresOptions, Ilu0};

/// Cone margin every accepted iterate keeps at every interior node.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-10;
/// Smallest line-search step before giving up.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub admissibility_margin: f64,
    pub linear_tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            admissibility_margin: ADMISSIBILITY_MARGIN,
            linear_tolerance: 1e-11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: GridField,
    pub residual_max: f64,
    pub newton_iterations: usize,
    pub line_search_backtracks: usize,
    pub linear_iterations: usize,
    pub admissible: bool,
    pub h: f64,
    pub min_cone_margin: f64,
    /// Max-norm residual before each Newton step and at termination.
    pub residual_history: Vec<f64>,
}

/// Serializable part of a [`SolveReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub residual_max: f64,
    pub newton_iterations: usize,
    pub line_search_backtracks: usize,
    pub linear_iterations: usize,
    pub admissible: bool,
    pub h: f64,
    pub interior_nodes: usize,
    pub min_cone_margin: f64,
    pub residual_history: Vec<f64>,
    pub min_u: f64,
    pub max_u: f64,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        let u = self.field.interior_values();
        SolveSummary {
            residual_max: self.residual_max,
            newton_iterations: self.newton_iterations,
            line_search_backtracks: self.line_search_backtracks,
            linear_iterations: self.linear_iterations,
            admissible: self.admissible,
            h: self.h,
            interior_nodes: u.len(),
            min_cone_margin: self.min_cone_margin,
            residual_history: self.residual_history.clone(),
            min_u: u.iter().copied().fold(f64::INFINITY, f64::min),
            max_u: u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

fn check_dims(op: &OperatorSpec, dim: usize) -> Result<()> {
    if op.n != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: op.n });
    }
    Ok(())
}

/// `A = 1/f(1)`, the curvature of the subsolution.
pub fn subsolution_curvature(op: &OperatorSpec) -> f64 {
    1.0 / op.f_one()
}

/// `u̲(x) = (A/2)(|x − x_0|² − diam²)` with `x_0` the domain center.
pub fn subsolution_value(op: &OperatorSpec, domain: &DomainSpec, x: &[f64]) -> f64 {
    let a = subsolution_curvature(op);
    let c = domain.center();
    let r2: f64 = x.iter().zip(&c).map(|(p, q)| (p - q).powi(2)).sum();
    0.5 * a * (r2 - domain.diameter().powi(2))
}

/// Subsolution sampled at every node, boundary data included.
pub fn initial_guess(op: &OperatorSpec, domain: &DomainSpec, h: f64) -> Result<GridField> {
    check_dims(op, domain.dim())?;
    let grid = Grid::new(domain, h)?;
    Ok(initial_guess_on(op, &grid))
}

pub fn initial_guess_on(op: &OperatorSpec, grid: &Arc<Grid>) -> GridField {
    let domain = grid.domain().clone();
    GridField::from_fn(grid, |x| subsolution_value(op, &domain, x))
}

/// `F(D²_h u) − 1` at every interior node (interior order).
pub fn residual(op: &OperatorSpec, field: &GridField) -> Result<Vec<f64>> {
    check_dims(op, field.dim())?;
    let grid = field.grid();
    (0..grid.interior_nodes().len())
        .into_par_iter()
        .map(|slot| {
            let h = field.hessian_slot(slot);
            op.eval_matrix(&h).map(|f| f - 1.0).map_err(|e| {
                let idx = grid.interior_nodes()[slot];
                e.at_node(idx, grid.position(idx))
            })
        })
        .collect()
}

/// Minimal cone margin of the discrete Hessian spectrum over interior nodes,
/// with the node where it is attained.
pub fn min_cone_margin(op: &OperatorSpec, field: &GridField) -> (f64, usize) {
    let grid = field.grid();
    (0..grid.interior_nodes().len())
        .into_par_iter()
        .map(|slot| {
            let e = crate::linalg::eigen_sym(&field.hessian_slot(slot));
            (op.cone.margin_unchecked(&e.values), grid.interior_nodes()[slot])
        })
        .reduce(|| (f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
}

struct NodeEval {
    residual: f64,
    row: Vec<(usize, f64)>,
    /// Contribution of the current boundary data to the linearized row.
    boundary_term: f64,
}

fn evaluate(op: &OperatorSpec, field: &GridField, margin: f64, with_rows: bool) -> Option<Vec<NodeEval>> {
    let grid = field.grid().clone();
    let dim = grid.dim();
    let pairs = pair_lines(dim);
    (0..grid.interior_nodes().len())
        .into_par_iter()
        .map(|slot| {
            let h = field.hessian_slot(slot);
            let lin = op.linearize(&h).ok()?;
            if op.cone.margin_unchecked(&lin.spectrum) < margin {
                return None;
            }
            let mut row = Vec::new();
            let mut boundary_term = 0.0;
            if with_rows {
                let lines = &grid.stencils[slot].lines;
                let mut push = |line: &grid::Line, w: f64| {
                    let (c0, cp, cm) = line.second();
                    row.push((slot, w * c0));
                    for (arm, c) in [(line.plus, cp), (line.minus, cm)] {
                        match arm.interior_slot(&grid) {
                            Some(s) => row.push((s, w * c)),
                            None => boundary_term += w * c * field.arm_value(arm),
                        }
                    }
                };
                for a in 0..dim {
                    push(&lines[a], lin.matrix.get(a, a));
                }
                for (p, &(a, b)) in pairs.iter().enumerate() {
                    // F^{ab} and F^{ba} each weight (D₊ − D₋)/2.
                    let w = lin.matrix.get(a, b);
                    push(&lines[dim + 2 * p], w);
                    push(&lines[dim + 2 * p + 1], -w);
                }
            }
            Some(NodeEval { residual: lin.value - 1.0, row, boundary_term })
        })
        .collect()
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves the Dirichlet problem with default options and the given tolerance.
pub fn solve(op: &OperatorSpec, domain: &DomainSpec, h: f64, tol: f64, max_iter: usize) -> Result<SolveReport> {
    let opts = SolveOptions { tol, max_iter, ..SolveOptions::default() };
    solve_with(op, domain, h, &opts)
}

pub fn solve_with(op: &OperatorSpec, domain: &DomainSpec, h: f64, opts: &SolveOptions) -> Result<SolveReport> {
    check_dims(op, domain.dim())?;
    if !(opts.tol > 0.0) {
        return Err(Error::NonPositiveParameter { name: "tol", value: opts.tol });
    }
    let grid = Grid::new(domain, h)?;
    let mut field = initial_guess_on(op, &grid);
    let gmres_opts = GmresOptions {
        relative_tolerance: opts.linear_tolerance,
        ..GmresOptions::default()
    };

    let mut current = match evaluate(op, &field, opts.admissibility_margin, true) {
        Some(ev) => ev,
        None => {
            // Report the offending node through the residual path.
            residual(op, &field)?;
            let (m, idx) = min_cone_margin(op, &field);
            return Err(Error::NotAdmissible {
                cone: op.cone.to_string(),
                values: vec![m],
            }
            .at_node(idx, grid.position(idx)));
        }
    };
    let merit = |ev: &[NodeEval], f: &GridField| max_abs(ev.iter().map(|e| e.residual)).max(f.boundary_mismatch());
    let mut res_max = merit(&current, &field);
    let mut history = vec![res_max];
    let mut iterations = 0;
    let mut backtracks = 0;
    let mut linear_iterations = 0;

    while res_max > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::MaxIterations { iterations, residual: res_max });
        }
        // Boundary data moves to zero, so its increment is minus its value.
        let rhs: Vec<f64> = current.iter().map(|e| -e.residual + e.boundary_term).collect();
        let rows: Vec<Vec<(usize, f64)>> = current.into_iter().map(|e| e.row).collect();
        let jac = CsrMatrix::from_rows(rows);
        let ilu = Ilu0::new(&jac)?;
        let (delta, stats) = gmres(&jac, &rhs, &ilu, &gmres_opts)?;
        linear_iterations += stats.iterations;

        let base = field.interior_values();
        let mut step = 1.0;
        let accepted = loop {
            let trial_u: Vec<f64> = base.iter().zip(&delta).map(|(u, d)| u + step * d).collect();
            let mut trial = field.clone();
            trial.set_interior_values(&trial_u);
            trial.scale_boundary(1.0 - step);
            if let Some(ev) = evaluate(op, &trial, opts.admissibility_margin, true) {
                let trial_res = merit(&ev, &trial);
                if trial_res <= (1.0 - 1e-4 * step) * res_max {
                    break Some((trial, ev, trial_res));
                }
            }
            step *= 0.5;
            backtracks += 1;
            if step < MIN_STEP {
                break None;
            }
        };
        match accepted {
            Some((trial, ev, trial_res)) => {
                field = trial;
                current = ev;
                res_max = trial_res;
            }
            None => return Err(Error::LineSearchStagnation { step, residual: res_max }),
        }
        iterations += 1;
        history.push(res_max);
    }

    let (min_margin, _) = min_cone_margin(op, &field);
    Ok(SolveReport {
        field,
        residual_max: res_max,
        newton_iterations: iterations,
        line_search_backtracks: backtracks,
        linear_iterations,
        admissible: min_margin >= opts.admissibility_margin,
        h,
        min_cone_margin: min_margin,
        residual_history: history,
    })
}
