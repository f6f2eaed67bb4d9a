//! Quasi-stationary distributions for killed continuous-time jump processes.
//!
//! A model is a conservative Q-matrix on states `E = {1..N}` plus an implicit
//! absorbing cemetery state `0`. The crate computes
//!
//! * the decay parameter `λ` ([`spectral::decay_parameter`]), by two
//!   independent routes that cross-check each other;
//! * the λ-recurrence classification ([`spectral::classify`]);
//! * taboo sums of the λ-shifted embedded kernel and the finite exit kernel
//!   on the exit states `H` ([`taboo`]);
//! * λ-invariant measures and vectors and the λ-QSD ([`qsd`]), either assembled
//!   from the exit kernel or solved directly as a positive left eigenvector;
//! * hitting probabilities, the h-transformed generator and the associated
//!   moment bound ([`htransform`]);
//! * an exact path simulator used to validate all of the above ([`simulate`]).
//!
//! Countable models (the builtin families) are handled through finite
//! windows; mass leaving the window is redirected to the cemetery so every
//! window is itself a conservative killed generator.
//!
//! State positions in the API are 0-based dense indices into a model. The
//! text formats in [`format`] use 1-based indices with `0` for the cemetery.

// Comparisons such as `!(x > 0.0)` are written to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod format;
pub mod htransform;
pub mod linalg;
pub mod model;
pub mod qsd;
pub mod simulate;
pub mod spectral;
pub mod taboo;

pub use error::{Error, Result};
pub use model::{ExitSet, GeneratorModel, ModelFamily, ModelFamilySpec};
