//! Library side of `invmerton`: job configs, the subcommands and the
//! built-in fixtures.

// `!(x > 0)` is how NaN gets rejected along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod examples;
