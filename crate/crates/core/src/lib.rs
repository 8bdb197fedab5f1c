// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mcar;
pub mod precision;
pub mod priors;
pub mod regression;
pub mod slice;
pub mod truncated;

pub use error::{Error, Result};
