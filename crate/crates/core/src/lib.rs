//! Coulomb multi-marginal transport, fractional transport and the
//! dissociation limit of semiclassical strongly correlated density functionals.
//!
//! All quantities are in atomic units. Measures are subprobabilities on R³,
//! either discrete point clouds or radial densities on a grid.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dissociation;
pub mod error;
pub mod functionals;
pub mod gb;
pub mod lp;
pub mod measures;
pub mod mmot;
pub mod optim;
pub mod partial;
pub mod tolerances;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, Measure, NucleiConfig, Point3, RadialDensity};
pub use mmot::{Method, MmotResult, TransportPlan};
