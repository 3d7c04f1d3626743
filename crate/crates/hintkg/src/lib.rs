//! Std companion of `hintkg-core`: dataset files, checkpoints, completion
//! backends, experiment runs and the `hintkg` command line.

pub mod backend;
pub mod checkpoint;
pub mod cli;
pub mod config;
mod error;
pub mod experiment;
pub mod export;
pub mod manifest;
pub mod synth;
pub mod tsv;

pub use error::{Error, Result};
