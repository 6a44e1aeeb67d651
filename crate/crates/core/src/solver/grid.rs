//! Node-centered Cartesian grids with cut-distance stencils.
//!
//! Every second derivative is a three-point difference along a grid line
//! with possibly unequal arms. Arms that leave a ball end at the exact
//! intersection with the sphere (a "cut point"), where the boundary value
//! is prescribed. Mixed derivatives use the two diagonal lines of each
//! coordinate plane: `u_ab = (D_{e_a+e_b} − D_{e_a−e_b}) / 2`, which reduces
//! to the symmetric four-point cross stencil away from the boundary. All
//! stencils are exact on quadratics.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::solver::domain::{DomainSpec, Shape};

/// Per-axis node caps.
pub const MAX_NODES_2D: usize = 257;
pub const MAX_NODES_3D: usize = 65;
/// Minimum number of interior nodes per axis.
pub const MIN_INTERIOR_PER_AXIS: usize = 8;

/// Nodes closer than this fraction of `h` to a sphere are boundary nodes.
const SNAP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Arm {
    Node(usize),
    Cut(usize),
}

impl Arm {
    /// Interior slot of a node arm; `None` for boundary nodes and cut points.
    pub(crate) fn interior_slot(self, grid: &Grid) -> Option<usize> {
        match self {
            Arm::Node(j) => grid.interior_slot(j),
            Arm::Cut(_) => None,
        }
    }
}

/// Three-point line stencil with arm lengths `plus_len`, `minus_len`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Line {
    pub plus: Arm,
    pub minus: Arm,
    pub plus_len: f64,
    pub minus_len: f64,
}

impl Line {
    /// Coefficients `(center, plus, minus)` of the second derivative.
    pub fn second(&self) -> (f64, f64, f64) {
        let (a, b) = (self.plus_len, self.minus_len);
        (-2.0 / (a * b), 2.0 / (a * (a + b)), 2.0 / (b * (a + b)))
    }

    /// Coefficients `(center, plus, minus)` of the first derivative.
    pub fn first(&self) -> (f64, f64, f64) {
        let (a, b) = (self.plus_len, self.minus_len);
        ((a - b) / (a * b), b / (a * (a + b)), -a / (b * (a + b)))
    }
}

/// Axis lines first, then for each pair `a < b` the `e_a+e_b` and `e_a−e_b` lines.
#[derive(Debug, Clone)]
pub(crate) struct NodeStencil {
    pub lines: Vec<Line>,
}

pub(crate) fn pair_lines(dim: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..dim {
        for b in a + 1..dim {
            out.push((a, b));
        }
    }
    out
}

/// Geometry shared by all fields on one grid.
#[derive(Debug)]
pub struct Grid {
    domain: DomainSpec,
    dim: usize,
    h: f64,
    counts: Vec<usize>,
    strides: Vec<usize>,
    origin: Vec<f64>,
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
    slot: Vec<usize>,
    pub(crate) stencils: Vec<NodeStencil>,
    cuts: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(domain: &DomainSpec, h: f64) -> Result<Arc<Self>> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::NonPositiveParameter { name: "h", value: h });
        }
        let dim = domain.dim();
        let (origin, extents): (Vec<f64>, Vec<f64>) = match domain.shape() {
            Shape::Box { lo, hi } => (lo.clone(), lo.iter().zip(hi).map(|(a, b)| b - a).collect()),
            Shape::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), vec![2.0 * radius; dim])
            }
        };
        let mut counts = Vec::with_capacity(dim);
        for &ext in &extents {
            let cells = (ext / h).round();
            if cells < 1.0 || ((cells * h) - ext).abs() > 1e-9 * ext {
                return Err(Error::InvalidDomain(format!(
                    "spacing {h} does not divide the extent {ext}"
                )));
            }
            counts.push(cells as usize + 1);
        }
        let cap = if dim == 2 { MAX_NODES_2D } else { MAX_NODES_3D };
        if counts.iter().any(|&c| c > cap) {
            return Err(Error::InvalidDomain(format!(
                "grid {counts:?} exceeds the cap of {cap} nodes per axis in {dim}D"
            )));
        }
        if counts.iter().any(|&c| c < MIN_INTERIOR_PER_AXIS + 2) {
            return Err(Error::InvalidDomain(format!(
                "grid {counts:?} resolves fewer than {MIN_INTERIOR_PER_AXIS} interior nodes per axis"
            )));
        }
        let mut strides = vec![1; dim];
        for a in (0..dim - 1).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        let total: usize = counts.iter().product();

        let mut grid = Grid {
            domain: domain.clone(),
            dim,
            h,
            counts,
            strides,
            origin,
            kinds: Vec::with_capacity(total),
            interior: Vec::new(),
            slot: vec![usize::MAX; total],
            stencils: Vec::new(),
            cuts: Vec::new(),
        };
        for idx in 0..total {
            let kind = grid.classify(idx);
            if kind == NodeKind::Interior {
                grid.slot[idx] = grid.interior.len();
                grid.interior.push(idx);
            }
            grid.kinds.push(kind);
        }
        let interior = grid.interior.clone();
        for idx in interior {
            let st = grid.build_stencil(idx);
            grid.stencils.push(st);
        }
        Ok(Arc::new(grid))
    }

    fn classify(&self, idx: usize) -> NodeKind {
        let mi = self.multi_index(idx);
        match self.domain.shape() {
            Shape::Box { .. } => {
                if mi.iter().zip(&self.counts).all(|(&i, &c)| i > 0 && i < c - 1) {
                    NodeKind::Interior
                } else {
                    NodeKind::Boundary
                }
            }
            Shape::Ball { center, radius } => {
                let x = self.position(idx);
                let d = dist(&x, center);
                if d < radius - SNAP_FRACTION * self.h {
                    NodeKind::Interior
                } else if d <= radius + SNAP_FRACTION * self.h {
                    NodeKind::Boundary
                } else {
                    NodeKind::Exterior
                }
            }
        }
    }

    fn offset_neighbor(&self, idx: usize, offset: &[i64]) -> usize {
        let mi = self.multi_index(idx);
        let mut out = 0usize;
        for a in 0..self.dim {
            let i = mi[a] as i64 + offset[a];
            debug_assert!(i >= 0 && (i as usize) < self.counts[a]);
            out += i as usize * self.strides[a];
        }
        out
    }

    fn arm(&mut self, idx: usize, offset: &[i64]) -> (Arm, f64) {
        let step: f64 = offset.iter().map(|o| (*o as f64).powi(2)).sum::<f64>().sqrt() * self.h;
        let nb = self.offset_neighbor(idx, offset);
        match self.kinds.get(nb).copied().unwrap_or(NodeKind::Exterior) {
            NodeKind::Interior | NodeKind::Boundary => (Arm::Node(nb), step),
            NodeKind::Exterior => {
                let (center, radius) = match self.domain.shape() {
                    Shape::Ball { center, radius } => (center.clone(), *radius),
                    Shape::Box { .. } => unreachable!("box grids have no exterior nodes"),
                };
                let x = self.position(idx);
                let p: Vec<f64> = x.iter().zip(&center).map(|(a, b)| a - b).collect();
                let q: Vec<f64> = offset.iter().map(|o| *o as f64 * self.h).collect();
                let qq: f64 = q.iter().map(|v| v * v).sum();
                let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
                let pp: f64 = p.iter().map(|v| v * v).sum();
                let t = ((-pq + (pq * pq - qq * (pp - radius * radius)).sqrt()) / qq).clamp(0.0, 1.0);
                let pos: Vec<f64> = x.iter().zip(&q).map(|(a, b)| a + t * b).collect();
                let id = self.cuts.len();
                self.cuts.push(pos);
                (Arm::Cut(id), t * step)
            }
        }
    }

    fn line(&mut self, idx: usize, offset: &[i64]) -> Line {
        let neg: Vec<i64> = offset.iter().map(|o| -o).collect();
        let (plus, plus_len) = self.arm(idx, offset);
        let (minus, minus_len) = self.arm(idx, &neg);
        Line { plus, minus, plus_len, minus_len }
    }

    fn build_stencil(&mut self, idx: usize) -> NodeStencil {
        let dim = self.dim;
        let mut lines = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            let mut o = vec![0i64; dim];
            o[a] = 1;
            lines.push(self.line(idx, &o));
        }
        for (a, b) in pair_lines(dim) {
            let mut o = vec![0i64; dim];
            o[a] = 1;
            o[b] = 1;
            lines.push(self.line(idx, &o));
            o[b] = -1;
            lines.push(self.line(idx, &o));
        }
        NodeStencil { lines }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    /// Flat indices of interior nodes in row-major order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    /// Position of `idx` among the interior nodes, if interior.
    pub fn interior_slot(&self, idx: usize) -> Option<usize> {
        self.slot.get(idx).copied().filter(|&s| s != usize::MAX)
    }

    pub fn cut_count(&self) -> usize {
        self.cuts.len()
    }

    pub fn cut_position(&self, id: usize) -> &[f64] {
        &self.cuts[id]
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut rest = idx;
        self.strides
            .iter()
            .map(|&s| {
                let i = rest / s;
                rest %= s;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn position(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + i as f64 * self.h)
            .collect()
    }

    /// Smallest arm length over the stencil of an interior node, relative to `h`.
    pub fn min_arm_fraction(&self, slot: usize) -> f64 {
        self.stencils[slot]
            .lines
            .iter()
            .map(|l| l.plus_len.min(l.minus_len) / self.h)
            .fold(f64::INFINITY, f64::min)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Grid function with values at nodes and at cut points.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    cut_values: Vec<f64>,
}

pub type ScalarField = GridField;

impl GridField {
    /// Samples `f` at interior nodes; boundary nodes and cut points get `0`.
    pub fn dirichlet_zero<F: Fn(&[f64]) -> f64>(grid: &Arc<Grid>, f: F) -> Self {
        let values = (0..grid.node_count())
            .map(|idx| match grid.kind(idx) {
                NodeKind::Interior => f(&grid.position(idx)),
                NodeKind::Boundary => 0.0,
                NodeKind::Exterior => f64::NAN,
            })
            .collect();
        Self { grid: grid.clone(), values, cut_values: vec![0.0; grid.cut_count()] }
    }

    /// Samples `f` everywhere, including boundary nodes and cut points.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &Arc<Grid>, f: F) -> Self {
        let values = (0..grid.node_count())
            .map(|idx| match grid.kind(idx) {
                NodeKind::Exterior => f64::NAN,
                _ => f(&grid.position(idx)),
            })
            .collect();
        let cut_values = (0..grid.cut_count()).map(|c| f(grid.cut_position(c))).collect();
        Self { grid: grid.clone(), values, cut_values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Values at interior nodes, in interior order.
    pub fn interior_values(&self) -> Vec<f64> {
        self.grid.interior.iter().map(|&i| self.values[i]).collect()
    }

    pub(crate) fn set_interior_values(&mut self, u: &[f64]) {
        for (&idx, &v) in self.grid.interior.iter().zip(u) {
            self.values[idx] = v;
        }
    }

    /// Overwrites one node value.
    pub fn set_value(&mut self, idx: usize, v: f64) {
        self.values[idx] = v;
    }

    /// Returns a copy with every node and cut value multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * t).collect(),
            cut_values: self.cut_values.iter().map(|v| v * t).collect(),
        }
    }

    /// Largest boundary value magnitude over boundary nodes and cut points.
    pub fn boundary_mismatch(&self) -> f64 {
        let nodes = (0..self.grid.node_count())
            .filter(|&i| self.grid.kinds[i] == NodeKind::Boundary)
            .map(|i| self.values[i].abs());
        nodes.chain(self.cut_values.iter().map(|v| v.abs())).fold(0.0, f64::max)
    }

    /// Multiplies all boundary data (boundary nodes and cut points) by `factor`.
    pub(crate) fn scale_boundary(&mut self, factor: f64) {
        for i in 0..self.grid.node_count() {
            if self.grid.kinds[i] == NodeKind::Boundary {
                self.values[i] *= factor;
            }
        }
        for v in &mut self.cut_values {
            *v *= factor;
        }
    }

    pub(crate) fn arm_value(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Node(i) => self.values[i],
            Arm::Cut(c) => self.cut_values[c],
        }
    }

    fn slot_of(&self, idx: usize) -> Result<usize> {
        self.grid.interior_slot(idx).ok_or(Error::NodeNotInterior(idx))
    }

    pub(crate) fn hessian_slot(&self, slot: usize) -> SymMatrix {
        let grid = &self.grid;
        let dim = grid.dim;
        let u0 = self.values[grid.interior[slot]];
        let lines = &grid.stencils[slot].lines;
        let second = |l: &Line| {
            let (c0, cp, cm) = l.second();
            c0 * u0 + cp * self.arm_value(l.plus) + cm * self.arm_value(l.minus)
        };
        let mut h = SymMatrix::zeros(dim);
        for a in 0..dim {
            h.set(a, a, second(&lines[a]));
        }
        for (p, (a, b)) in pair_lines(dim).into_iter().enumerate() {
            let dp = second(&lines[dim + 2 * p]);
            let dm = second(&lines[dim + 2 * p + 1]);
            h.set(a, b, 0.5 * (dp - dm));
        }
        h
    }

    pub(crate) fn gradient_slot(&self, slot: usize) -> Vec<f64> {
        let grid = &self.grid;
        let u0 = self.values[grid.interior[slot]];
        grid.stencils[slot].lines[..grid.dim]
            .iter()
            .map(|l| {
                let (c0, cp, cm) = l.first();
                c0 * u0 + cp * self.arm_value(l.plus) + cm * self.arm_value(l.minus)
            })
            .collect()
    }

    /// Discrete Hessian at an interior node.
    pub fn hessian_fd(&self, idx: usize) -> Result<SymMatrix> {
        Ok(self.hessian_slot(self.slot_of(idx)?))
    }

    /// Discrete gradient at an interior node.
    pub fn gradient_fd(&self, idx: usize) -> Result<Vec<f64>> {
        Ok(self.gradient_slot(self.slot_of(idx)?))
    }

    /// Multilinear interpolation at `x`; `None` if any cell corner is exterior
    /// or `x` lies outside the grid.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let grid = &self.grid;
        let dim = grid.dim;
        let mut base = Vec::with_capacity(dim);
        let mut frac = Vec::with_capacity(dim);
        for a in 0..dim {
            let s = (x[a] - grid.origin[a]) / grid.h;
            if !(s >= -1e-12 && s <= (grid.counts[a] - 1) as f64 + 1e-12) {
                return None;
            }
            let i = (s.floor() as usize).min(grid.counts[a] - 2);
            base.push(i);
            frac.push((s - i as f64).clamp(0.0, 1.0));
        }
        let mut acc = 0.0;
        for mask in 0..1usize << dim {
            let mut w = 1.0;
            let mut mi = base.clone();
            for a in 0..dim {
                if mask >> a & 1 == 1 {
                    mi[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w == 0.0 {
                continue;
            }
            let idx = grid.flat_index(&mi);
            if grid.kinds[idx] == NodeKind::Exterior {
                return None;
            }
            acc += w * self.values[idx];
        }
        Some(acc)
    }

    /// CSV with header `x,y[,z],u`, one row per non-exterior node in row-major order.
    pub fn to_csv(&self) -> String {
        let axes = ["x", "y", "z"];
        let mut out = String::new();
        out.push_str(&axes[..self.grid.dim].join(","));
        out.push_str(",u\n");
        for idx in 0..self.grid.node_count() {
            if self.grid.kinds[idx] == NodeKind::Exterior {
                continue;
            }
            for c in self.grid.position(idx) {
                let _ = write!(out, "{c:.17e},");
            }
            let _ = writeln!(out, "{:.17e}", self.values[idx]);
        }
        out
    }
}
