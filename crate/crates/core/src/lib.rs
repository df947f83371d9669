//! Dynamic-object-aware RGB-D visual odometry, object tracking and mapping.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamic;
pub mod ego;
pub mod error;
pub mod eval;
pub mod features;
pub mod feedback;
pub mod geometry;
pub mod image;
pub mod io;
pub mod map;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
