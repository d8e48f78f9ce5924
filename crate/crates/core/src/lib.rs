//! Deterministic ergodic exploration of a Mixture-of-Gaussians reference
//! distribution by a point robot.
//!
//! The robot deposits a narrow Gaussian of unit mass at every step. Its
//! time-averaged deposit `rho_k` is compared with the reference `rho*`; the
//! ergodic function `V_k = integral |rho_k - rho*|` is driven toward zero by
//! visiting the mixture components ("holes") in a fixed tour and staying in
//! each long enough that every transit-plus-dwell pair lowers `V`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ergodic;
pub mod error;
pub mod export;
pub mod field;
pub mod gaussian;
pub mod mask;
pub mod output;
pub mod planner;
pub mod sim;

pub use config::{emit_config, parse_config, parse_config_str, THREE_HOLE_CONFIG};
pub use error::{Error, Result, ValidationError, Violation};
pub use field::{GridSpec, Point, ScalarField};
pub use gaussian::{Cov, Gaussian, GaussianComponent, MixtureModel};
pub use mask::RegionMask;
pub use sim::{run, SimConfig, SimTrace};
