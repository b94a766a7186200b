//! Implicit Euler time stepping combined with gradient discretisations for
//! linear parabolic problems on Ω = (0, 1), with generalized time boundary
//! conditions linking u(0) and u(T) through a contraction.
//!
//! The crate provides:
//! - the gradient-discretisation abstraction (reconstructions, weighted
//!   norms, coercivity constant, discrete Riesz operator, L² projection);
//! - concrete mass-lumped CVFE and conforming P1 instances;
//! - the time-stepping scheme, including the coupled solve when the time
//!   boundary operator is nonzero;
//! - exact and manufactured solutions with controlled evaluation error;
//! - the error functionals E1, E2, the Riesz-derivative gap, the space-time
//!   distance and the conformity measure, plus convergence-rate extraction;
//! - least-squares interpolation onto the discrete space and the associated
//!   consistency and limit-conformity measures;
//! - randomized verification of the operator inequalities underlying the
//!   stability analysis;
//! - a CLI harness that reproduces the low-regularity convergence studies
//!   and emits CSV tables and SVG log-log plots.

pub mod builders;
pub mod discretisation;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod field;
pub mod interp;
pub mod lemmas;
pub mod linalg;
pub mod metrics;
pub mod plot;
pub mod problem;
pub mod quadrature;
pub mod solver;

pub use builders::{build_cvfe, build_p1, Mesh1D};
pub use discretisation::GradientDiscretisation;
pub use error::{GdmError, Result};
pub use field::{PiecewiseField, PiecewiseGradient, SpaceFn, WeightOperator};
