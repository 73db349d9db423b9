//! IO companion to `sharp-core`: dataset and run-log formats, policy
//! checkpoints, the `sharp` command line and the human annotation service.

pub mod commands;
pub mod error;
pub mod formats;
pub mod runlog;
pub mod service;

pub use error::{IoError, Result};
