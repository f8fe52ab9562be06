//! Numerical tolerances shared by every check.
//!
//! Absolute values in double precision. Every comparison `f <= g` in the
//! library is evaluated as `f <= g + slack` with one of these constants as
//! the default slack; callers can override them per check.

/// Algebraic identities (lattice laws, identity semigroup law, linearity).
pub const TOL_ARITH: f64 = 1e-9;

/// Continuity of a piecewise affine function at its knots.
pub const TOL_KNOT: f64 = 1e-12;

/// Threshold below which a sampled value counts as zero (support detection).
pub const TOL_ZERO: f64 = 1e-12;

/// Semigroup-law defects of quadrature-based operators.
pub const LAW_TOL: f64 = 1e-6;

/// Heat-kernel normalisation error.
pub const QUAD_TOL: f64 = 1e-8;

/// Semiflow law defects.
pub const FLOW_TOL: f64 = 1e-9;

/// Default window and resolution for checks on the real line.
pub const DEFAULT_WINDOW: (f64, f64) = (-50.0, 50.0);
pub const DEFAULT_GRID_POINTS: usize = 20001;
