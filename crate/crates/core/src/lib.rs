//! Invariant-set-preserving time stepping for a semilinear age-structured
//! population model.
//!
//! The age axis is discretized into cells of width `da`, and all times are
//! multiples of `da`. On that lattice the transport semigroup and its
//! integrated counterpart are exact. The modules build on each other:
//!
//! * [`grid`]: cell-averaged `L^p` functions, the set `C` of admissible
//!   densities, distance and projection.
//! * [`semigroup`]: translation and integrated semigroups, the growth bound `delta`.
//! * [`convolution`]: convolution of the integrated semigroup with step forcings.
//! * [`model`]: birth and death terms with crowding truncation.
//! * [`scheme`]: the adaptive knot construction and its checks.
//! * [`oracles`]: Picard and characteristics reference solvers.
//! * [`cli`]: config files, experiments and report files.

// Comparisons are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod convolution;
pub mod error;
pub mod grid;
pub mod model;
pub mod oracles;
pub mod probes;
pub mod scheme;
pub mod semigroup;

pub use error::{Error, Result};
