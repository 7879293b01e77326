//! Least-squares fitting of `K` concentric co-dimension-1 subspheres to data
//! on the polysphere `(S^m)^K`, with plug-in asymptotic inference for the
//! common axis.
//!
//! The pieces, from the bottom up:
//!
//! - [`sphere`]: distances, exponential and log maps, projection onto a
//!   subsphere, rotations that fix an axis.
//! - [`params`]: the parameter space `S^m × (0, π)^K`, its quotient under
//!   `(c, r) ~ (-c, π - r)` and the quotient metric.
//! - [`loss`]: intrinsic, extrinsic, slicing and naive extrinsic residuals,
//!   the normalized objective and its chart derivatives.
//! - [`fit`]: the eigen solution for the slicing loss and profiled chart
//!   descent for the rest.
//! - [`asymptotics`]: sandwich covariance, axis confidence regions and Wald
//!   tests, block decomposition of the plug-in matrices.
//! - [`synthetic`]: seeded data generation and Monte Carlo studies.
//! - [`harness`]: file formats and the command implementations behind the
//!   `subsphere` binary.

pub mod asymptotics;
pub mod data;
pub mod error;
pub mod fit;
pub mod harness;
pub mod loss;
pub mod params;
pub mod seed;
pub mod sphere;
pub mod summation;
pub mod synthetic;

pub use asymptotics::{
    axis_confidence_region, axis_wald_test, chart_at, corollary_blocks, estimate_asymptotics,
    AsymptoticEstimate, ConfidenceRegion, CorollaryBlocks, ProductChart, TestResult,
};
pub use data::PolysphereSample;
pub use error::{Error, Result};
pub use fit::{fit, fit_great_subsphere, fit_slicing, FitConfig, FitResult, Initializer};
pub use loss::{
    objective, objective_gradient, objective_hessian, residual_distance, LossKind, ObjectiveValue,
};
pub use params::{canonicalize, param_distance, SubsphereClass, SubsphereParams};
pub use seed::RandomSeed;
pub use sphere::{
    exp_map, extrinsic_distance, geodesic_distance, log_map, project_to_subsphere,
    rotation_fixing_axis, Rotation, TangentFrame, TangentVector, UnitVector,
};
pub use synthetic::{generate, mc_study, GeneratorSpec, McConfig, McReport};
