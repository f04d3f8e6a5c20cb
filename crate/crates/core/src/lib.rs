//! Joint 3D scene and human pose reconstruction by energy minimization
//! over a parse graph.

// `!(x > 0.0)` is used so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classes;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod hoi_prior;
pub mod inference;
pub mod scene;
pub mod schema;
pub mod templates;

pub use error::{Error, Result};
