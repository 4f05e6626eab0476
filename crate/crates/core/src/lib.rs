#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod loo;
pub mod metrics;
pub mod scores;
pub mod tsne;

pub use error::{Error, Result};
