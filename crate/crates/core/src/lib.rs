//! Regularly varying random fields on `Z^d`: tail processes, anchored
//! clusters, blocks estimators, and local-alignment score extremes.

pub mod alignment;
pub mod anchoring;
pub mod blocks;
pub mod error;
pub mod lattice;
pub mod models;
pub mod rng;
pub mod stats;
pub mod tailproc;

pub use error::{Error, Result};
pub use lattice::{ClusterShape, LatticeWindow, MultiIndex};
pub use models::MaModel;
