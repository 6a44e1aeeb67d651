//! Empirical probes on solved fields: the interior estimate functional
//! `(−u) + (−u)^α|Du| + (−u)^β|D²u|`, the C0 bound, refinement studies,
//! the blow-down rescaling `v_R(y) = (u(Ry) − R²)/R²` and a quadratic-fit
//! rigidity probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, spectral_norm, SymMatrix};
use crate::operators::{condition_n_constants, OperatorSpec};
use crate::solver::{self, subsolution_value, DomainSpec, GridField, Grid, SolveOptions, SolveSummary};

/// Slack for the C0 and subsolution ordering checks.
pub const ORDERING_SLACK: f64 = 1e-8;
/// Box nodes closer than this many mesh widths to a corner are clipped.
pub const DEFAULT_CORNER_CLIP: f64 = 4.0;

/// Default `(α, β)` with `N2 = n − 1`: `α = (N2 + 2)/2`, `β = N2 + (4α + 2) + 1`.
pub fn default_exponents(n: usize) -> (f64, f64) {
    let n2 = n as f64 - 1.0;
    let alpha = (n2 + 2.0) / 2.0;
    (alpha, n2 + 4.0 * alpha + 3.0)
}

/// Same as [`default_exponents`] with `N2` taken from the operator's condition-N constants.
pub fn default_exponents_for(op: &OperatorSpec) -> (f64, f64) {
    let n2 = condition_n_constants(op, 1.0).map(|c| c.n2).unwrap_or(op.n as f64 - 1.0);
    let alpha = (n2 + 2.0) / 2.0;
    (alpha, n2 + 4.0 * alpha + 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub alpha: f64,
    pub beta: f64,
    /// Exclude box nodes within `factor·h` of a corner.
    pub corner_clip: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub alpha: f64,
    pub beta: f64,
    pub h: f64,
    /// `sup (−u + (−u)^α|Du| + (−u)^β|D²u|)` over the nodes used.
    pub functional_sup: f64,
    pub sup_neg_u: f64,
    pub sup_gradient_term: f64,
    pub sup_hessian_term: f64,
    pub argmax_position: Vec<f64>,
    pub nodes_used: usize,
    pub nodes_clipped: usize,
    /// `diam²/(2 f(1))` when the operator is known.
    pub c0_bound: Option<f64>,
    /// `|functional(h_next) − functional(h)| / functional(h)` in a study.
    pub stabilization_ratio: Option<f64>,
}

fn near_corner(domain: &DomainSpec, x: &[f64], radius: f64) -> bool {
    domain.corners().iter().any(|c| {
        let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
        d2 < radius * radius
    })
}

/// Evaluates the estimate functional at every interior node with
/// `|D²u|` the spectral norm and `|Du|` the Euclidean norm.
pub fn estimate_functional(field: &GridField, alpha: f64, beta: f64) -> Result<EstimateReport> {
    estimate_functional_with(field, &EstimateOptions { alpha, beta, corner_clip: None })
}

pub fn estimate_functional_with(field: &GridField, opts: &EstimateOptions) -> Result<EstimateReport> {
    for (name, v) in [("alpha", opts.alpha), ("beta", opts.beta)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositiveParameter { name, value: v });
        }
    }
    let grid = field.grid();
    let nodes = grid.interior_nodes();
    for &idx in nodes {
        let u = field.value(idx);
        if !(u < 0.0) {
            return Err(Error::NonNegativeValue { node: idx, value: u });
        }
    }
    let clip = opts.corner_clip.map(|f| f * field.h());
    let terms: Vec<Option<[f64; 3]>> = (0..nodes.len())
        .into_par_iter()
        .map(|slot| {
            let idx = nodes[slot];
            if let Some(r) = clip {
                if near_corner(grid.domain(), &grid.position(idx), r) {
                    return None;
                }
            }
            let w = -field.value(idx);
            let g = field.gradient_slot(slot).iter().map(|v| v * v).sum::<f64>().sqrt();
            let hn = spectral_norm(&field.hessian_slot(slot));
            Some([w, w.powf(opts.alpha) * g, w.powf(opts.beta) * hn])
        })
        .collect();

    let mut sups = [0.0_f64; 3];
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    let mut used = 0;
    for (slot, t) in terms.iter().enumerate() {
        let Some(t) = t else { continue };
        used += 1;
        for k in 0..3 {
            sups[k] = sups[k].max(t[k]);
        }
        let total = t[0] + t[1] + t[2];
        if total > best.0 {
            best = (total, nodes[slot]);
        }
    }
    if used == 0 {
        return Err(Error::InvalidArgument("corner clipping removed every node".into()));
    }
    Ok(EstimateReport {
        alpha: opts.alpha,
        beta: opts.beta,
        h: field.h(),
        functional_sup: best.0,
        sup_neg_u: sups[0],
        sup_gradient_term: sups[1],
        sup_hessian_term: sups[2],
        argmax_position: grid.position(best.1),
        nodes_used: used,
        nodes_clipped: nodes.len() - used,
        c0_bound: None,
        stabilization_ratio: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C0Check {
    pub holds: bool,
    /// `diam²(Ω)/(2 f(1))`.
    pub c: f64,
    pub min_u: f64,
    pub max_u: f64,
}

/// `−C − slack ≤ u < 0` at every interior node, `C = diam²/(2 f(1))`.
pub fn c0_check(field: &GridField, op: &OperatorSpec) -> C0Check {
    let c = field.grid().domain().diameter().powi(2) / (2.0 * op.f_one());
    let u = field.interior_values();
    let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
    let max_u = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    C0Check { holds: min_u >= -c - ORDERING_SLACK && max_u < 0.0, c, min_u, max_u }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub holds: bool,
    /// `min (u − u̲)` over interior nodes.
    pub min_gap: f64,
    pub worst_position: Vec<f64>,
}

/// `u ≥ u̲ − slack` at every interior node.
pub fn subsolution_ordering(field: &GridField, op: &OperatorSpec) -> OrderingCheck {
    let grid = field.grid();
    let mut worst = (f64::INFINITY, grid.interior_nodes()[0]);
    for &idx in grid.interior_nodes() {
        let x = grid.position(idx);
        let gap = field.value(idx) - subsolution_value(op, grid.domain(), &x);
        if gap < worst.0 {
            worst = (gap, idx);
        }
    }
    OrderingCheck {
        holds: worst.0 >= -ORDERING_SLACK,
        min_gap: worst.0,
        worst_position: grid.position(worst.1),
    }
}

/// Max-norm difference between a field and `exact` over interior nodes.
pub fn max_error<F: Fn(&[f64]) -> f64>(field: &GridField, exact: F) -> f64 {
    let grid = field.grid();
    grid.interior_nodes()
        .iter()
        .map(|&i| (field.value(i) - exact(&grid.position(i))).abs())
        .fold(0.0, f64::max)
}

/// `log(e_i/e_{i+1}) / log(h_i/h_{i+1})` for consecutive pairs.
pub fn observed_orders(h: &[f64], errors: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(errors.windows(2))
        .map(|(hh, ee)| (ee[0] / ee[1]).ln() / (hh[0] / hh[1]).ln())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub h: f64,
    pub solve: SolveSummary,
    pub estimate: EstimateReport,
    pub c0: C0Check,
    pub ordering: OrderingCheck,
}

#[derive(Debug, Clone)]
pub struct RefinementStudy {
    pub rows: Vec<RefinementRow>,
    pub fields: Vec<GridField>,
}

impl RefinementStudy {
    /// Ratio of the last refinement, if there are at least two rows.
    pub fn last_ratio(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.estimate.stabilization_ratio)
    }

    /// CSV with one row per mesh width.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "h,functional_sup,sup_neg_u,sup_gradient_term,sup_hessian_term,stabilization_ratio,residual_max,newton_iterations,min_u,c0_holds,ordering_holds\n",
        );
        for r in &self.rows {
            let ratio = r.estimate.stabilization_ratio.map(|v| format!("{v:.17e}")).unwrap_or_default();
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{},{:.17e},{},{}\n",
                r.h,
                r.estimate.functional_sup,
                r.estimate.sup_neg_u,
                r.estimate.sup_gradient_term,
                r.estimate.sup_hessian_term,
                ratio,
                r.solve.residual_max,
                r.solve.newton_iterations,
                r.solve.min_u,
                r.c0.holds,
                r.ordering.holds,
            ));
        }
        out
    }
}

/// One solve and estimate per mesh width; rows run concurrently.
///
/// `h_list` must be strictly decreasing. Box domains are corner-clipped at
/// `opts.corner_clip` (default [`DEFAULT_CORNER_CLIP`] when `None` is passed
/// for a box through [`refinement_study`]).
pub fn refinement_study_with(
    op: &OperatorSpec,
    domain: &DomainSpec,
    h_list: &[f64],
    estimate: &EstimateOptions,
    solve: &SolveOptions,
) -> Result<RefinementStudy> {
    if h_list.is_empty() {
        return Err(Error::InvalidArgument("empty h list".into()));
    }
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("h list must be strictly decreasing".into()));
    }
    // Validate every grid before spending time on solves.
    for &h in h_list {
        Grid::new(domain, h)?;
    }
    let results: Vec<Result<(RefinementRow, GridField)>> = h_list
        .par_iter()
        .map(|&h| {
            let rep = solver::solve_with(op, domain, h, solve)?;
            let mut est = estimate_functional_with(&rep.field, estimate)?;
            let c0 = c0_check(&rep.field, op);
            est.c0_bound = Some(c0.c);
            let ordering = subsolution_ordering(&rep.field, op);
            Ok((RefinementRow { h, solve: rep.summary(), estimate: est, c0, ordering }, rep.field))
        })
        .collect();
    let mut rows = Vec::with_capacity(h_list.len());
    let mut fields = Vec::with_capacity(h_list.len());
    for r in results {
        let (row, field) = r?;
        rows.push(row);
        fields.push(field);
    }
    for i in 1..rows.len() {
        let prev = rows[i - 1].estimate.functional_sup;
        let cur = rows[i].estimate.functional_sup;
        rows[i].estimate.stabilization_ratio = Some((cur - prev).abs() / prev);
    }
    Ok(RefinementStudy { rows, fields })
}

/// [`refinement_study_with`] with default solver options; boxes are clipped
/// at [`DEFAULT_CORNER_CLIP`]`·h` from the corners.
pub fn refinement_study(
    op: &OperatorSpec,
    domain: &DomainSpec,
    h_list: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<RefinementStudy> {
    let clip = (!domain.is_ball()).then_some(DEFAULT_CORNER_CLIP);
    let opts = EstimateOptions { alpha, beta, corner_clip: clip };
    refinement_study_with(op, domain, h_list, &opts, &SolveOptions::default())
}

/// Smooth bump `amplitude·exp(1 − 1/(1 − s))`, `s = |x − center|²/radius²`,
/// supported in the ball of the given radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Bump {
    fn s(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, c)| (a - c).powi(2)).sum::<f64>() / self.radius.powi(2)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s = self.s(x);
        if s >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
        }
    }

    pub fn hessian(&self, x: &[f64]) -> SymMatrix {
        let n = x.len();
        let mut h = SymMatrix::zeros(n);
        let s = self.s(x);
        if s >= 1.0 {
            return h;
        }
        let e = self.amplitude * (1.0 - 1.0 / (1.0 - s)).exp();
        let g1 = -1.0 / (1.0 - s).powi(2);
        let g2 = -2.0 / (1.0 - s).powi(3);
        let r2 = self.radius.powi(2);
        let ds: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| 2.0 * (a - c) / r2).collect();
        for i in 0..n {
            for j in i..n {
                let mut v = (g1 * g1 + g2) * ds[i] * ds[j];
                if i == j {
                    v += g1 * 2.0 / r2;
                }
                h.set(i, j, e * v);
            }
        }
        h
    }
}

/// `u(x) = ½ xᵀMx + bump(x) − (bump(0))`, normalized so that `u(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSource {
    pub hessian: SymMatrix,
    pub bump: Option<Bump>,
    /// Growth constant `C` with `u(x) ≥ |x|²/C − C`.
    pub growth_c: f64,
}

impl AnalyticSource {
    /// `u = a|x|²/2` with the smallest admissible growth constant `2/a`.
    pub fn radial(a: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::NonPositiveParameter { name: "a", value: a });
        }
        Ok(Self { hessian: SymMatrix::identity(n).scaled(a), bump: None, growth_c: 2.0 / a })
    }

    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    fn raw(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += x[i] * self.hessian.get(i, j) * x[j];
            }
        }
        0.5 * q + self.bump.as_ref().map_or(0.0, |b| b.value(x))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.raw(x) - self.raw(&vec![0.0; x.len()])
    }

    pub fn hessian_at(&self, x: &[f64]) -> SymMatrix {
        match &self.bump {
            Some(b) => self.hessian.add(&b.hessian(x)),
            None => self.hessian.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BlowdownSource {
    Analytic(AnalyticSource),
    /// Solved field on a domain containing the origin, with its growth constant.
    Field { field: GridField, growth_c: f64 },
}

impl BlowdownSource {
    fn dim(&self) -> usize {
        match self {
            Self::Analytic(a) => a.dim(),
            Self::Field { field, .. } => field.dim(),
        }
    }

    fn growth_c(&self) -> f64 {
        match self {
            Self::Analytic(a) => a.growth_c,
            Self::Field { growth_c, .. } => *growth_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowdownRow {
    pub r: f64,
    /// Lattice nodes where `v_R` could be sampled.
    pub nodes_sampled: usize,
    /// Nodes of `Ω_R = {v_R < 0}`.
    pub omega_nodes: usize,
    /// Nodes of `Ω'_R = {v_R ≤ −1/2}`.
    pub inner_nodes: usize,
    pub inner_subset: bool,
    /// Largest distance between two nodes of `Ω_R`.
    pub diameter: f64,
    pub diameter_ok: bool,
    /// `sup |D²v_R|` (spectral norm of the lattice Hessian) over `Ω'_R`.
    pub hessian_sup: f64,
    /// `max |v_R − v_{R_0}|` over common nodes, `R_0` the first radius.
    pub invariance_defect: f64,
    /// `max |D²v_R(y) − D²u(Ry)|` entrywise, analytic sources only.
    pub hessian_equivariance_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowdownReport {
    pub growth_c: f64,
    /// `2√(C(C + 1))`.
    pub diameter_bound: f64,
    /// Lattice spacing in `y`.
    pub spacing: f64,
    pub rows: Vec<BlowdownRow>,
}

impl BlowdownReport {
    pub fn all_diameters_ok(&self) -> bool {
        self.rows.iter().all(|r| r.diameter_ok)
    }

    pub fn max_invariance_defect(&self) -> f64 {
        self.rows.iter().map(|r| r.invariance_defect).fold(0.0, f64::max)
    }

    pub fn max_hessian_equivariance_defect(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.hessian_equivariance_defect).try_fold(0.0_f64, |m, d| d.map(|d| m.max(d)))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "R,nodes_sampled,omega_nodes,inner_nodes,diameter,diameter_bound,hessian_sup,invariance_defect,hessian_equivariance_defect\n",
        );
        for r in &self.rows {
            let eq = r.hessian_equivariance_defect.map(|v| format!("{v:.17e}")).unwrap_or_default();
            out.push_str(&format!(
                "{:.17e},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                r.r, r.nodes_sampled, r.omega_nodes, r.inner_nodes, r.diameter, self.diameter_bound, r.hessian_sup, r.invariance_defect, eq
            ));
        }
        out
    }
}

/// Uniform lattice over `[−ρ, ρ]^n` restricted to `|y| ≤ ρ`.
struct Lattice {
    n: usize,
    per_axis: usize,
    rho: f64,
    spacing: f64,
}

impl Lattice {
    fn count(&self) -> usize {
        self.per_axis.pow(self.n as u32)
    }

    fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut mi = vec![0; self.n];
        for a in (0..self.n).rev() {
            mi[a] = idx % self.per_axis;
            idx /= self.per_axis;
        }
        mi
    }

    fn flat(&self, mi: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for &m in mi {
            if m < 0 || m >= self.per_axis as i64 {
                return None;
            }
            idx = idx * self.per_axis + m as usize;
        }
        Some(idx)
    }

    fn position(&self, idx: usize) -> Vec<f64> {
        self.multi(idx).iter().map(|&m| -self.rho + m as f64 * self.spacing).collect()
    }

    fn in_ball(&self, y: &[f64]) -> bool {
        y.iter().map(|v| v * v).sum::<f64>() <= self.rho * self.rho * (1.0 + 1e-12)
    }

    /// Central-difference Hessian; `None` unless the whole stencil is sampled.
    fn hessian(&self, v: &[Option<f64>], idx: usize) -> Option<SymMatrix> {
        let n = self.n;
        let mi: Vec<i64> = self.multi(idx).into_iter().map(|m| m as i64).collect();
        let at = |offs: &[(usize, i64)]| -> Option<f64> {
            let mut m = mi.clone();
            for &(a, d) in offs {
                m[a] += d;
            }
            v[self.flat(&m)?]
        };
        let h2 = self.spacing * self.spacing;
        let c = v[idx]?;
        let mut hm = SymMatrix::zeros(n);
        for a in 0..n {
            hm.set(a, a, (at(&[(a, 1)])? - 2.0 * c + at(&[(a, -1)])?) / h2);
            for b in a + 1..n {
                let pp = at(&[(a, 1), (b, 1)])?;
                let pm = at(&[(a, 1), (b, -1)])?;
                let mp = at(&[(a, -1), (b, 1)])?;
                let mm = at(&[(a, -1), (b, -1)])?;
                hm.set(a, b, (pp - pm - mp + mm) / (4.0 * h2));
            }
        }
        Some(hm)
    }
}

/// Blow-down rows for each `R` on a lattice with `per_axis` nodes per axis
/// over `{|y|² ≤ C(C + 1)}`.
pub fn blowdown(source: &BlowdownSource, r_list: &[f64], per_axis: usize) -> Result<BlowdownReport> {
    let n = source.dim();
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    if r_list.is_empty() || r_list.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidArgument("R list must be non-empty and positive".into()));
    }
    if per_axis < 5 || per_axis % 2 == 0 {
        return Err(Error::InvalidArgument(format!("lattice needs an odd node count >= 5, got {per_axis}")));
    }
    let c = source.growth_c();
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::NonPositiveParameter { name: "growth_c", value: c });
    }
    let rho = (c * (c + 1.0)).sqrt();
    let lattice = Lattice { n, per_axis, rho, spacing: 2.0 * rho / (per_axis - 1) as f64 };

    let u0 = match source {
        BlowdownSource::Analytic(a) => a.value(&vec![0.0; n]),
        BlowdownSource::Field { field, .. } => field
            .interpolate(&vec![0.0; n])
            .ok_or_else(|| Error::Blowdown("the origin is outside the solved field".into()))?,
    };
    if !u0.is_finite() {
        return Err(Error::Blowdown(format!("u(0) = {u0} after normalization")));
    }
    let u = |x: &[f64]| -> Option<f64> {
        match source {
            BlowdownSource::Analytic(a) => Some(a.value(x)),
            BlowdownSource::Field { field, .. } => field.interpolate(x).map(|v| v - u0),
        }
    };

    let samples: Vec<Result<Vec<Option<f64>>>> = r_list
        .par_iter()
        .map(|&r| {
            (0..lattice.count())
                .map(|idx| {
                    let y = lattice.position(idx);
                    if !lattice.in_ball(&y) {
                        return Ok(None);
                    }
                    let x: Vec<f64> = y.iter().map(|v| r * v).collect();
                    let Some(ux) = u(&x) else { return Ok(None) };
                    let x2: f64 = x.iter().map(|v| v * v).sum();
                    if ux < x2 / c - c - 1e-12 * (1.0 + x2) {
                        return Err(Error::Blowdown(format!(
                            "growth constant {c} violated at x = {x:?}: u = {ux}"
                        )));
                    }
                    Ok(Some((ux - r * r) / (r * r)))
                })
                .collect()
        })
        .collect();
    let samples: Vec<Vec<Option<f64>>> = samples.into_iter().collect::<Result<_>>()?;
    let in_ball = (0..lattice.count()).filter(|&i| lattice.in_ball(&lattice.position(i))).count();
    for (&r, v) in r_list.iter().zip(&samples) {
        let sampled = v.iter().filter(|x| x.is_some()).count();
        if sampled < in_ball {
            return Err(Error::Blowdown(format!(
                "R = {r}: {} of {in_ball} lattice nodes fall outside the solved field",
                in_ball - sampled
            )));
        }
    }

    let bound = 2.0 * rho;
    let rows = r_list
        .par_iter()
        .zip(&samples)
        .map(|(&r, v)| {
            let omega: Vec<usize> = (0..v.len()).filter(|&i| v[i].is_some_and(|x| x < 0.0)).collect();
            let inner: Vec<usize> = (0..v.len()).filter(|&i| v[i].is_some_and(|x| x <= -0.5)).collect();
            let inner_subset = inner.iter().all(|i| omega.binary_search(i).is_ok());
            let diameter = set_diameter(&lattice, &omega, v);
            let mut hessian_sup: f64 = 0.0;
            let mut eq_defect: Option<f64> = match source {
                BlowdownSource::Analytic(_) => Some(0.0),
                BlowdownSource::Field { .. } => None,
            };
            for &i in &inner {
                let Some(hm) = lattice.hessian(v, i) else { continue };
                hessian_sup = hessian_sup.max(spectral_norm(&hm));
                if let (BlowdownSource::Analytic(a), Some(d)) = (source, eq_defect.as_mut()) {
                    let x: Vec<f64> = lattice.position(i).iter().map(|y| r * y).collect();
                    let exact = a.hessian_at(&x);
                    *d = d.max(hm.add(&exact.scaled(-1.0)).max_abs());
                }
            }
            let invariance_defect = samples[0]
                .iter()
                .zip(v)
                .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
                .fold(0.0, f64::max);
            BlowdownRow {
                r,
                nodes_sampled: v.iter().filter(|x| x.is_some()).count(),
                omega_nodes: omega.len(),
                inner_nodes: inner.len(),
                inner_subset,
                diameter,
                diameter_ok: diameter <= bound,
                hessian_sup,
                invariance_defect,
                hessian_equivariance_defect: eq_defect,
            }
        })
        .collect();
    Ok(BlowdownReport { growth_c: c, diameter_bound: bound, spacing: lattice.spacing, rows })
}

/// Max pairwise distance, taken over the nodes of the set that have an axis
/// neighbour outside it.
fn set_diameter(lattice: &Lattice, set: &[usize], v: &[Option<f64>]) -> f64 {
    let inside = |idx: Option<usize>| idx.and_then(|i| v[i]).is_some_and(|x| x < 0.0);
    let rim: Vec<Vec<f64>> = set
        .iter()
        .filter(|&&i| {
            let mi: Vec<i64> = lattice.multi(i).into_iter().map(|m| m as i64).collect();
            (0..lattice.n).any(|a| {
                [-1, 1].iter().any(|&d| {
                    let mut m = mi.clone();
                    m[a] += d;
                    !inside(lattice.flat(&m))
                })
            })
        })
        .map(|&i| lattice.position(i))
        .collect();
    let mut best: f64 = 0.0;
    for (k, p) in rim.iter().enumerate() {
        for q in &rim[k + 1..] {
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleReport {
    /// Fitted `c + b·(x − x_0) + ½(x − x_0)ᵀH(x − x_0)`.
    pub constant: f64,
    pub linear: Vec<f64>,
    pub hessian: SymMatrix,
    pub expansion_point: Vec<f64>,
    /// `max |D²_h u − H|` in spectral norm over interior nodes.
    pub deviation: f64,
    /// Root-mean-square residual of the value fit.
    pub fit_rms: f64,
    pub nodes: usize,
}

/// Least-squares quadratic fit to the interior values of `field`, and the
/// sup distance between the discrete Hessian and the fitted constant one.
pub fn liouville_probe(field: &GridField) -> Result<LiouvilleReport> {
    let grid = field.grid();
    let n = grid.dim();
    let x0 = grid.domain().center();
    let nodes = grid.interior_nodes();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let cols = 1 + n + pairs.len();
    let mut a = Vec::with_capacity(nodes.len() * cols);
    let mut b = Vec::with_capacity(nodes.len());
    for &idx in nodes {
        let x: Vec<f64> = grid.position(idx).iter().zip(&x0).map(|(p, c)| p - c).collect();
        a.push(1.0);
        a.extend_from_slice(&x);
        for &(i, j) in &pairs {
            a.push(if i == j { 0.5 * x[i] * x[i] } else { x[i] * x[j] });
        }
        b.push(field.value(idx));
    }
    let coef = least_squares(&a, cols, &b)?;
    let mut hessian = SymMatrix::zeros(n);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        hessian.set(i, j, coef[1 + n + k]);
    }
    let sq: f64 = a
        .chunks(cols)
        .zip(&b)
        .map(|(row, y)| (row.iter().zip(&coef).map(|(p, q)| p * q).sum::<f64>() - y).powi(2))
        .sum();
    let neg = hessian.scaled(-1.0);
    let deviation = (0..nodes.len())
        .into_par_iter()
        .map(|slot| spectral_norm(&field.hessian_slot(slot).add(&neg)))
        .reduce(|| 0.0, f64::max);
    Ok(LiouvilleReport {
        constant: coef[0],
        linear: coef[1..=n].to_vec(),
        hessian,
        expansion_point: x0,
        deviation,
        fit_rms: (sq / nodes.len() as f64).sqrt(),
        nodes: nodes.len(),
    })
}

/// [`liouville_probe`] on `u` sampled over a grid of `domain`.
pub fn liouville_probe_fn<F: Fn(&[f64]) -> f64>(u: F, domain: &DomainSpec, h: f64) -> Result<LiouvilleReport> {
    let grid = Grid::new(domain, h)?;
    liouville_probe(&GridField::from_fn(&grid, u))
}
