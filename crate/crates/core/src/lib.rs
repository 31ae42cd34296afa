// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod mtoct;
pub mod pair;
pub mod pendular;
pub mod plot;
pub mod units;

pub use error::{Error, Result};
