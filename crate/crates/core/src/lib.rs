//! Verification laboratory for relaxation approximations of
//! hyperbolic-parabolic systems.
//!
//! - [`model`]: the relaxation-system and target-system abstractions and
//!   finite-difference Jacobians.
//! - [`models`]: the builtin relaxation models and their registry.
//! - [`criteria`]: sampled checks of the five structural conditions, the
//!   Chapman-Enskog limit comparison and the randomized general-model validator.
//! - [`solver`]: IMEX finite-volume integration and target reference solutions.
//! - [`harness`]: `eps`-sweep convergence studies.
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the component notation of the matrices they fill.
#![allow(clippy::needless_range_loop)]

pub mod criteria;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod models;
pub mod solver;

pub use error::{Error, Result};
pub use model::{ModelDims, RelaxModel, StateBox, StateVec, TargetPde};
pub use models::{build_model, BuiltModel, ModelOptions};
