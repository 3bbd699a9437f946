//! Std companion of `tango-core`: versioned file formats, checkpoints, text
//! loaders for embeddings and knowledge graphs, run configuration, and the
//! instruction server. The `tango` binary wraps all of it.

pub mod ckpt;
pub mod config;
pub mod error;
pub mod loaders;
pub mod records;
pub mod server;

pub use ckpt::Checkpoint;
pub use config::{EmbeddingSource, RunConfig};
pub use error::{Error, Result};
