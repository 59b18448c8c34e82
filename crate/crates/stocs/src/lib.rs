//! File formats, the parallel estimation pipeline and the `stocs`
//! command-line tool, built on `stocs-core`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod bytes;
pub mod cli;
pub mod depth;
pub mod error;
pub mod heatmap;
pub mod pipeline;
pub mod ply;
pub mod records;
pub mod scene;
pub mod spm;

pub use error::{Error, Result};
