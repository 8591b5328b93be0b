//! Numerical laboratory for Finsler metric measure spaces.
//!
//! The crate evaluates Finsler metric families and their curvatures, solves
//! the logarithmic Schrödinger-type heat equation
//! `u_t = Δu + a·u·log u + b·u` on coordinate grids, and checks Li-Yau
//! gradient bounds, Harnack inequalities and a priori bounds numerically.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::type_complexity)]

pub mod dual;
pub mod error;
pub mod expr;
pub mod geodesics;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod metric;
pub mod operators;
pub mod pde;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod sparse;

pub use error::{FinslerError, Result};
