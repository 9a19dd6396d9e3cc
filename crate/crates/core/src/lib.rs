//! Wasserstein distributionally robust optimization.
//!
//! * [`regularizer`] evaluates worst-case expected losses over `W_p` balls
//!   through the one-dimensional dual, with an independent primal oracle on
//!   finite grids.
//! * [`concentration`] computes the rate function and tail bounds that make
//!   `ρ ∝ n^{-1/2}` radii sufficient.
//! * [`calibration`] turns problem constants into radii and failure budgets.
//! * [`models`] solves robust newsvendor, linear prediction and mean-variance
//!   portfolio problems.
//! * [`certify`] replays all of the above on synthetic data drawn from a known
//!   distribution and counts how often the guarantees fail.
//!
//! Batch work fans out over rayon when the `parallel` feature is on; every
//! parallel path collects in index order so results are identical to the
//! sequential fallback.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod certify;
pub mod concentration;
pub mod distribution;
pub mod domain;
pub mod error;
pub mod jsonfmt;
pub mod loss;
pub mod models;
pub mod norm;
pub mod optim;
pub mod par;
pub mod regularizer;
pub mod seed;

pub use distribution::{expectation, DiscreteDistribution};
pub use domain::DomainSpec;
pub use error::{Result, WdroError};
pub use loss::{BaseLoss, LossFamily, LossModel, PredictionMode};
pub use norm::{ground_distance, GroundNorm, NormSpec};
pub use par::Execution;
pub use regularizer::{robust_loss_dual, robust_loss_oracle, RobustEvalResult};
