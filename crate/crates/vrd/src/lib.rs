//! File formats, parallel drivers and the command line around `vrd-core`.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod features;
pub mod manifest;
pub mod model_io;
pub mod parallel;

pub use error::{Error, ErrorKind, Result};
