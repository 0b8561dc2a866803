//! Situated chart blending: file formats, the diffusion backend client,
//! end-to-end pipeline runs, iteration sessions and the HTTP service.

pub mod backend;
pub mod error;
pub mod gallery;
pub mod hashing;
pub mod pipeline;
pub mod png_io;
pub mod service;
pub mod session;
pub mod spec_format;
pub mod tiles;

pub use error::{AtStage, Stage, StageError};
