// `!(a > b)` is used on purpose throughout so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod baco;
pub mod co_variants;
pub mod error;
pub mod gp;
pub mod harness;
pub mod local_opt;
pub mod mdo;
pub mod rng;
pub mod sampling;
pub mod scalable;
pub mod trace;

pub use error::{Error, Result};
pub use mdo::*;
