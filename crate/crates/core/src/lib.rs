//! Numerical laboratory for homogeneous one-phase free boundary solutions on
//! the cone `x4 = c|x|` in four dimensions.
//!
//! Axisymmetric fields are written in cone spherical coordinates `(r, phi)`,
//! with `phi` the polar angle measured from the positive `x3` axis.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod barrier_lab;
pub mod cone_geometry;
pub mod elliptic_grid;
mod error;
pub mod fbp_minimizer;
pub mod numerics;
pub mod ode_engine;
pub mod stability_analysis;
pub mod weiss_monitor;

pub use error::{Error, Result};
