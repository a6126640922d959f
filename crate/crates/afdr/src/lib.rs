//! File formats, experiment configuration and command implementations for
//! the adaptive disturbance-rejection toolkit in `afdr-core`.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod report;
pub mod system_file;

pub use error::{AppError, Result};
