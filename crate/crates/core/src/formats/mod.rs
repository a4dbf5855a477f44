//! On-disk formats: AFE1 embeddings, CSV inputs, JSON reports, sweep tables.

pub mod embeddings;
pub mod tables;

pub use embeddings::{read_embeddings, write_embeddings};
pub use tables::*;
