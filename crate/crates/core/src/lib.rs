//! Covariance-domain optimization for the downlink of a two-operator C-RAN
//! with spectrum pooling.
//!
//! The bandwidth is split into two private subbands and one shared subband.
//! Each operator's cloud processor (CP) precodes and quantizes baseband
//! signals for its own radio units (RUs) over fronthaul links, and forwards
//! quantized signals for the other operator's RUs over an inter-CP backhaul
//! link. The design problem (bandwidth split, precoders, quantization noise
//! covariances) is solved by the concave-convex procedure on a rank-relaxed
//! difference-of-convex program.
//!
//! Crate layout:
//!
//! - [`model`]: scenario configuration, geometry and channel generation,
//!   stacking and selection matrices.
//! - [`metrics`]: exact evaluation of rates, compression rates, privacy
//!   leakage, transmit power and constraint residuals for a design point.
//! - [`dcp`]: linearizations and the convexified subproblem as a
//!   solver-agnostic intermediate representation.
//! - [`solver`]: the log-barrier subproblem solver, feasible initialization,
//!   the CCCP outer loop and rank projection.
//! - [`experiments`]: Monte-Carlo sweeps, configuration and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dcp;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use metrics::{ConstraintId, ConstraintReport, DesignPoint};
pub use model::{
    BandwidthScheme, ChannelRealization, CompressionMode, NetworkConfig, StackedChannels,
};
pub use solver::{cccp, CccpOptions, Solution, SolutionStatus};
