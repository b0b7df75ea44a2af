#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod geometry;
pub mod junction;
pub mod ljunction;
pub mod pipeline;
pub mod prior;
pub mod raster;
pub mod saliency;
pub mod scene;

pub use error::{Error, Result};
