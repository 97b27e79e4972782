//! Numerical tolerances shared across modules.
//!
//! Each constant is the single source for its threshold; tests and the CLI
//! report these values alongside every computed number.

/// Slack allowed above unit mass for a subprobability.
pub const TOL_MASS: f64 = 1e-9;

/// Distance below which two discrete points are merged into one atom.
pub const MERGE_DISTANCE: f64 = 1e-12;

/// Pairwise distance below which a tuple is treated as a coincidence (infinite cost).
pub const COINCIDENCE_EPS: f64 = 1e-12;

/// Marginal feasibility required of every transport plan.
pub const TOL_MARGINAL: f64 = 1e-8;

/// Largest number of tuples the exact LP will enumerate.
pub const LP_SIZE_CAP: u128 = 1_000_000;

/// Maximum Sinkhorn sweeps before reporting an iteration-limit error.
pub const SINKHORN_MAX_ITER: usize = 100_000;

/// Default entropic cost cap as a multiple of the largest finite pair cost.
pub const ENTROPIC_CAP_FACTOR: f64 = 1e3;

/// Allowed violation of the transport bounds before an invariant error.
pub const BOUNDS_SLACK: f64 = 1e-8;

/// Absolute tolerance for g_b table monotonicity and convexity.
pub const CONV_TOL: f64 = 5e-3;

/// Absolute tolerance for the analytic branch of g_b and its lower bound.
pub const GB_NUM_TOL: f64 = 1e-3;

/// Smallest semiclassical parameter accepted by the direct minimizers.
pub const EPSILON_FLOOR: f64 = 1e-3;

/// Default uniform radial grid.
pub const RADIAL_R_MAX: f64 = 40.0;
pub const RADIAL_INTERVALS: usize = 4000;

/// Default master seed for stochastic restarts.
pub const DEFAULT_SEED: u64 = 42;
