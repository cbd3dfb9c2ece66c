//! Files, completion backends, reports and the command line around `sentcomp-core`.

pub mod backend;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod prompts;
pub mod report;

pub use error::{Error, Result};
