//! File formats, logit backends, the parallel generation pipeline and the
//! `traitsteer` command line on top of `traitsteer-core`.

pub mod backend;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod remote;

pub use error::{Error, Result};
