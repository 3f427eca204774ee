//! Numerical laboratory for the interior-degenerate wave equation
//! `u_tt - div(|x|^alpha grad u) = chi_omega f` on box domains.
//!
//! * [`geometry`]: domains, grids, the degenerate coefficient, control regions
//! * [`spaces`]: weighted norms, energies, Hardy and embedding ratios
//! * [`wavesolver`]: flux-form leapfrog forward/backward solves
//! * [`carleman`]: Carleman weights and weighted inequality sides
//! * [`control`]: HUM Gramian, control synthesis and observability sampling
//! * [`cli`]: scenario files and the command-line front end

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod carleman;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod geometry;
pub mod output;
pub mod spaces;
pub mod wavesolver;

pub use error::{Error, Result};
