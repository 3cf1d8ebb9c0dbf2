// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod deadreck;
pub mod error;
pub mod experiment;
pub mod export;
pub mod geo;
pub mod linalg;
pub mod neural;
pub mod recon;
pub mod simgen;
pub mod similarity;

pub use error::{Error, Result};
