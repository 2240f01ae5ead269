//! Generalized (non-polynomial) spline spaces over T-meshes.

// NaN must fail range checks, so `!(x >= floor)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod approx;
pub mod bernstein;
pub mod chebyshev;
pub mod cli;
pub mod gspace;
pub mod oracle;
pub mod sectionspace;
pub mod tmesh;
