//! Numerical laboratory for instantaneously complete Ricci flow on the disc,
//! written as the logarithmic fast diffusion equation `∂ₜU = Δ log U` in
//! logarithmic polar coordinates, together with certificates for the
//! interior area and volume-excess estimates that control uniqueness.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod flux;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
