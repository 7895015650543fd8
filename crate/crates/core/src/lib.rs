//! Orthonormal spline systems of arbitrary order over admissible knot sequences, with
//! diagnostics for the Hardy space `H^1` on `[0, 1]`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::large_enum_variant)]

pub mod adversary;
pub mod analysis;
pub mod banded;
pub mod bspline;
pub mod cli;
pub mod error;
pub mod io;
pub mod knotseq;
pub mod orthosys;
pub mod quadrature;
pub mod stats;

pub use error::{Error, Result};
