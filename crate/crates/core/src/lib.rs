//! Naive-Bayes mixture clustering with minimal characteristic labels.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod labelsearch;
pub mod mixture;
pub mod modelselect;
pub mod numeric;

pub use error::{Error, ErrorKind, Result};
