use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// Bounded domain in dimension 2 or 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Shape", into = "Shape")]
pub struct DomainSpec {
    shape: Shape,
}

impl DomainSpec {
    pub fn new(shape: Shape) -> Result<Self> {
        match &shape {
            Shape::Box { lo, hi } => {
                if lo.len() != hi.len() || !(2..=3).contains(&lo.len()) {
                    return Err(Error::InvalidDomain(format!(
                        "box corners must both have dimension 2 or 3, got {} and {}",
                        lo.len(),
                        hi.len()
                    )));
                }
                if lo.iter().chain(hi).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDomain("non-finite box corner".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| b <= a) {
                    return Err(Error::InvalidDomain("box extents must be positive".into()));
                }
            }
            Shape::Ball { center, radius } => {
                if !(2..=3).contains(&center.len()) {
                    return Err(Error::InvalidDomain(format!(
                        "ball center must have dimension 2 or 3, got {}",
                        center.len()
                    )));
                }
                if center.iter().any(|v| !v.is_finite()) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidDomain("ball needs a finite center and positive radius".into()));
                }
            }
        }
        Ok(Self { shape })
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::new(Shape::Ball { center: vec![0.0; dim], radius: 1.0 })
    }

    /// `[-1/2, 1/2]^dim`.
    pub fn unit_box(dim: usize) -> Result<Self> {
        Self::new(Shape::Box { lo: vec![-0.5; dim], hi: vec![0.5; dim] })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(Shape::Ball { center, radius })
    }

    pub fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::new(Shape::Box { lo, hi })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Ball { center, .. } => center.len(),
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self.shape, Shape::Ball { .. })
    }

    /// Box diagonal or `2·radius`.
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt(),
            Shape::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Ball center or box midpoint.
    pub fn center(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            Shape::Ball { center, .. } => center.clone(),
        }
    }

    /// Corner points of a box; empty for a ball.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        match &self.shape {
            Shape::Ball { .. } => Vec::new(),
            Shape::Box { lo, hi } => {
                let d = lo.len();
                (0..1usize << d)
                    .map(|mask| (0..d).map(|a| if mask >> a & 1 == 1 { hi[a] } else { lo[a] }).collect())
                    .collect()
            }
        }
    }
}

impl TryFrom<Shape> for DomainSpec {
    type Error = Error;

    fn try_from(shape: Shape) -> Result<Self> {
        DomainSpec::new(shape)
    }
}

impl From<DomainSpec> for Shape {
    fn from(d: DomainSpec) -> Shape {
        d.shape
    }
}
