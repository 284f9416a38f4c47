// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dantzig;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod par;
pub mod rng;
pub mod sensing;
pub mod stability;
pub mod support;

pub use error::{Error, Result};
pub use support::Support;
