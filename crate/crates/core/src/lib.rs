//! Learning on the angles of heavy-tailed observations: standardization,
//! extreme selection, angular minimum-volume sets, sparse regression and
//! classification on angles, tail cross-validation, simulation and
//! finite-sample bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anomaly;
pub mod bounds;
pub mod classification;
pub mod crossval;
pub mod data;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod par;
pub mod persist;
pub mod regression;
pub mod simulate;
pub mod tail;
pub mod transforms;

pub use data::Dataset;
pub use error::{Error, Result};
pub use geometry::NormSpec;
