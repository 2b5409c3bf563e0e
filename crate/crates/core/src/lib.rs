//! Persistent homology for 3D point clouds: filtered complexes, persistence
//! diagrams, diagram distances, vectorizations, topology-guided sampling and
//! the benchmark harnesses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod complex;
pub mod error;
pub mod export;
pub mod filtration;
pub mod fmt;
pub mod geometry;
pub mod metrics;
pub mod persistence;
pub mod sampling;
pub mod vectorize;

pub use error::{Error, Result};
