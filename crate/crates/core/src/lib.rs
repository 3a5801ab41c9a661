//! Grid-partitioned TSK neuro-fuzzy inference with hybrid learning, plus rule
//! reduction by principal components of the normalized firing strengths and
//! binary particle swarm selection of those components.

pub mod bench;
pub mod bpso;
pub mod consequent;
pub mod data;
pub mod error;
pub mod fuzzy;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pca;
pub mod reduction;

pub use error::{Error, Result};
