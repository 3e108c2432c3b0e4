//! File formats, configuration, batch processing and the command line on
//! top of `boundarykit-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod fsutil;
pub mod image_io;
pub mod manifest;
pub mod report;
pub mod selfcheck;
pub mod tensor;

pub use boundarykit_core as core;
pub use error::{Error, Result};
