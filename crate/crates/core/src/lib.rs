//! Function lattices on the real line, relative uniform convergence with
//! explicit regulators, and positive one-parameter operator semigroups.

// `!(x > 0.0)` style guards deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constructions;
pub mod error;
pub mod funcspace;
pub mod ru_conv;
pub mod semiflows;
pub mod semigroups;
pub mod tolerances;

pub use error::{Error, Result};
