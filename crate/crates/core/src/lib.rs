//! Numerical laboratory for fully nonlinear Hessian equations `F(D²u) = 1`
//! over convex invariant cones.
//!
//! * [`symfun`]: elementary symmetric polynomials and their identities.
//! * [`cones`]: Gårding cones `Γ_k` and p-sum cones `Γ̂_p`.
//! * [`operators`]: Monge-Ampère, k-Hessian, Hessian quotient and
//!   p-Monge-Ampère operators with analytic linearizations.
//! * [`conditions`]: pointwise and field checkers for conditions D, CNS and
//!   the sufficient hypotheses that imply them.
//! * [`solver`]: finite-difference damped Newton solver for the Dirichlet
//!   problem on boxes and balls.
//! * [`harness`]: interior estimate functional, C0 bound, refinement
//!   studies, blow-down rescaling and the quadratic rigidity probe.

pub mod audit;
pub mod conditions;
pub mod cones;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod operators;
pub mod solver;
pub mod symfun;

pub use error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 12;
