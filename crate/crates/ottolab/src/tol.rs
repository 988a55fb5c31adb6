//! Centralized numerical tolerances.
//!
//! Every comparison threshold used by the library lives here so that test
//! expectations and runtime guards cannot drift apart silently.

/// Relative tolerance for identity checks between two evaluation routes of
/// the same quantity (time-differenced vs quadrature, primary vs dual form).
pub const IDENTITY_REL: f64 = 2e-2;

/// Absolute floor for identity checks, applied when the compared quantities
/// are too small for a relative test to make sense.
pub const IDENTITY_ABS: f64 = 1e-7;

/// Disagreement beyond `CROSS_CHECK_FACTOR` times the identity tolerance is
/// treated as a defect (wrong operator, wrong sign) rather than truncation
/// error, and surfaces as `Error::CrossCheck`.
pub const CROSS_CHECK_FACTOR: f64 = 10.0;

/// Conservative solvers must keep the discrete mass constant to this
/// per-step relative drift.
pub const MASS_DRIFT_PER_STEP: f64 = 1e-12;

/// Relative mass budget over a full run.
pub const MASS_DRIFT_RUN: f64 = 1e-10;

/// Solver densities may undershoot zero by at most this fraction of the
/// maximum density before the run is declared unstable.
pub const DENSITY_UNDERSHOOT_REL: f64 = 1e-7;

/// Vacuum floor for singular integrands: cells with `rho <= floor` are
/// excluded, `floor = VACUUM_FLOOR_REL * max(rho)`.
pub const VACUUM_FLOOR_REL: f64 = 1e-12;

/// Cells of retreat from an analytic support boundary for integrands that
/// contain difference stencils; two cells keep every centered stencil on the
/// smooth side of the free boundary.
pub const SUPPORT_ERODE_CELLS: usize = 2;

/// Node-wise ODE residual budget for the scaling solutions (after
/// step-halving verification).
pub const ODE_RESIDUAL: f64 = 1e-8;

/// Slack granted to monotonicity and convexity sign checks.
pub const MONOTONICITY_SLACK: f64 = 1e-8;

/// A pressureless step is refused when `max|phi''| * dt` exceeds this bound:
/// the velocity field is about to fold and the density to concentrate, and
/// continuing would report garbage rather than the breakdown.
pub const CAUSTIC_PRODUCT: f64 = 0.25;
