#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod error;
pub mod geometry;
pub mod icp;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod render;
pub mod simulator;
pub mod stocs;
pub mod weak;

pub use error::{Error, Result};
